"""Self-contained SVG rendering for stability maps.

Draws a probability heat map over a 2-D gain box (red unstable, green
stable), iso-probability contours by marching squares, an optional
region mask rendered as a dashed boundary with excluded cells dimmed,
and point markers.  No plotting libraries; output is a plain SVG string.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

__all__ = ["heatmap_svg", "marching_segments", "write_svg"]

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 62, 18, 34, 50
_PLOT_W, _PLOT_H = 480, 400


def _color(p: float) -> str:
    """Red (0) through amber to green (1)."""
    p = min(max(p, 0.0), 1.0)
    if p < 0.5:
        f = p / 0.5
        r, g, b = 205, int(55 + 120 * f), 60
    else:
        f = (p - 0.5) / 0.5
        r, g, b = int(205 - 160 * f), int(175 + 15 * f), int(60 + 15 * f)
    return f"rgb({r},{g},{b})"


def marching_segments(xs: np.ndarray, ys: np.ndarray, z: np.ndarray,
                      level: float):
    """Level-curve segments of z[ix, iy] on the rectilinear grid (xs, ys).

    Returns ((x1,y1),(x2,y2)) pairs in data coordinates.  Saddle cells
    are split by the cell-center value.
    """
    segs = []
    nx, ny = z.shape

    def interp(pa, pb, va, vb):
        t = 0.5 if vb == va else (level - va) / (vb - va)
        t = min(max(t, 0.0), 1.0)
        return (pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]))

    for i in range(nx - 1):
        for j in range(ny - 1):
            v00, v10 = z[i, j], z[i + 1, j]
            v01, v11 = z[i, j + 1], z[i + 1, j + 1]
            code = ((v00 >= level) | ((v10 >= level) << 1)
                    | ((v11 >= level) << 2) | ((v01 >= level) << 3))
            if code in (0, 15):
                continue
            p00, p10 = (xs[i], ys[j]), (xs[i + 1], ys[j])
            p01, p11 = (xs[i], ys[j + 1]), (xs[i + 1], ys[j + 1])
            bottom = interp(p00, p10, v00, v10)
            top = interp(p01, p11, v01, v11)
            left = interp(p00, p01, v00, v01)
            right = interp(p10, p11, v10, v11)
            if code in (1, 14):
                segs.append((left, bottom))
            elif code in (2, 13):
                segs.append((bottom, right))
            elif code in (3, 12):
                segs.append((left, right))
            elif code in (4, 11):
                segs.append((top, right))
            elif code in (6, 9):
                segs.append((bottom, top))
            elif code in (7, 8):
                segs.append((left, top))
            elif code in (5, 10):
                center = 0.25 * (v00 + v10 + v01 + v11)
                hi = (center >= level)
                if (code == 5) == hi:
                    segs.append((left, top))
                    segs.append((bottom, right))
                else:
                    segs.append((left, bottom))
                    segs.append((top, right))
    return segs


def _ticks(lo: float, hi: float, n: int = 5):
    return np.linspace(lo, hi, n)


def heatmap_svg(xs: Sequence[float], ys: Sequence[float], probs: np.ndarray,
                *, contour_level: Optional[float] = None,
                mask: Optional[np.ndarray] = None,
                markers: Sequence[tuple] = (),
                xlabel: str = "", ylabel: str = "", title: str = "") -> str:
    """Render probs[ix, iy] over the box spanned by xs and ys.

    mask: boolean array, False cells are dimmed and their region
    boundary drawn dashed.  markers: (x, y, shape, color) with shape
    "star" or "dot".
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (len(xs), len(ys)):
        raise ValueError("probability grid shape does not match axes")

    x0, x1 = float(xs[0]), float(xs[-1])
    y0, y1 = float(ys[0]), float(ys[-1])
    w_total = _MARGIN_L + _PLOT_W + _MARGIN_R
    h_total = _MARGIN_T + _PLOT_H + _MARGIN_B

    def px(x):
        return _MARGIN_L + (x - x0) / (x1 - x0) * _PLOT_W

    def py(y):
        return _MARGIN_T + (y1 - y) / (y1 - y0) * _PLOT_H

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{w_total}" height="{h_total}" '
        f'viewBox="0 0 {w_total} {h_total}">',
        f'<rect width="{w_total}" height="{h_total}" fill="white"/>',
    ]

    # cell rectangles; each grid point owns a half-step neighborhood
    def edges(v):
        mids = 0.5 * (v[1:] + v[:-1])
        return np.concatenate([[v[0]], mids, [v[-1]]])

    ex, ey = edges(xs), edges(ys)
    for i in range(len(xs)):
        for j in range(len(ys)):
            xl, xr = px(ex[i]), px(ex[i + 1])
            yb, yt = py(ey[j]), py(ey[j + 1])
            fill = _color(probs[i, j])
            dim = mask is not None and not mask[i, j]
            op = ' fill-opacity="0.25"' if dim else ""
            out.append(
                f'<rect x="{xl:.2f}" y="{yt:.2f}" '
                f'width="{xr - xl:.2f}" height="{yb - yt:.2f}" '
                f'fill="{fill}"{op}/>')

    if contour_level is not None:
        for (ax, ay), (bx, by) in marching_segments(xs, ys, probs,
                                                    contour_level):
            out.append(
                f'<line x1="{px(ax):.2f}" y1="{py(ay):.2f}" '
                f'x2="{px(bx):.2f}" y2="{py(by):.2f}" '
                f'stroke="black" stroke-width="1.6"/>')

    if mask is not None and mask.any() and not mask.all():
        for (ax, ay), (bx, by) in marching_segments(
                xs, ys, mask.astype(float), 0.5):
            out.append(
                f'<line x1="{px(ax):.2f}" y1="{py(ay):.2f}" '
                f'x2="{px(bx):.2f}" y2="{py(by):.2f}" stroke="#222" '
                f'stroke-width="1.2" stroke-dasharray="6,4"/>')

    for mk in markers:
        mx, my, shape, color = mk
        cx, cy = px(mx), py(my)
        if shape == "star":
            pts = []
            for k in range(10):
                rad = 9.0 if k % 2 == 0 else 3.8
                ang = -np.pi / 2 + k * np.pi / 5
                pts.append(f"{cx + rad * np.cos(ang):.2f},"
                           f"{cy + rad * np.sin(ang):.2f}")
            out.append(f'<polygon points="{" ".join(pts)}" fill="{color}" '
                       f'stroke="white" stroke-width="0.8"/>')
        else:
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" '
                       f'fill="{color}" stroke="white" stroke-width="0.8"/>')

    # frame and ticks
    out.append(f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{_PLOT_W}" '
               f'height="{_PLOT_H}" fill="none" stroke="black"/>')
    font = 'font-family="sans-serif" font-size="12"'
    for tv in _ticks(x0, x1):
        out.append(f'<line x1="{px(tv):.2f}" y1="{_MARGIN_T + _PLOT_H}" '
                   f'x2="{px(tv):.2f}" y2="{_MARGIN_T + _PLOT_H + 5}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{px(tv):.2f}" y="{_MARGIN_T + _PLOT_H + 18}" '
                   f'{font} text-anchor="middle">{tv:.3g}</text>')
    for tv in _ticks(y0, y1):
        out.append(f'<line x1="{_MARGIN_L - 5}" y1="{py(tv):.2f}" '
                   f'x2="{_MARGIN_L}" y2="{py(tv):.2f}" stroke="black"/>')
        out.append(f'<text x="{_MARGIN_L - 8}" y="{py(tv):.2f}" {font} '
                   f'text-anchor="end" dominant-baseline="middle">'
                   f'{tv:.3g}</text>')
    if xlabel:
        out.append(f'<text x="{_MARGIN_L + _PLOT_W / 2}" '
                   f'y="{h_total - 12}" {font} '
                   f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        cx, cy = 16, _MARGIN_T + _PLOT_H / 2
        out.append(f'<text x="{cx}" y="{cy}" {font} text-anchor="middle" '
                   f'transform="rotate(-90 {cx} {cy})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{_MARGIN_L + _PLOT_W / 2}" y="20" {font} '
                   f'font-weight="bold" text-anchor="middle">{title}</text>')
    out.append("</svg>")
    return "\n".join(out)


def write_svg(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)
