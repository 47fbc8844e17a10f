"""Kernel SVM with posterior probability calibration.

Maps a controller parameter point to a predicted stability probability.
Training data are (point, 0|1) pairs produced by an exact stability
oracle; the calibrated model generalizes them to the whole box.

Pipeline: scale inputs to the unit hypercube, solve the soft-margin RBF
dual by pairwise coordinate ascent, then fit a sigmoid to the decision
values by maximum likelihood (Platt scaling with smoothed targets).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NumericalError, ValidationError

__all__ = [
    "LabeledSample", "SvmModel", "CalibratedSvm",
    "train_svm", "calibrate", "predict_prob",
    "save_model", "load_model",
]

C_BOX_DEFAULT = 10.0
KKT_TOL = 1e-6

# probabilities stay strictly inside (0,1) even when the sigmoid saturates
_P_FLOOR = 1e-300
_P_CEIL = 1.0 - 1e-16


@dataclass(frozen=True)
class LabeledSample:
    rho: tuple
    s: int

    def __post_init__(self):
        if self.s not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.s}")
        if not all(np.isfinite(v) for v in self.rho):
            raise ValidationError("sample coordinates must be finite")


def _as_matrix(data: Sequence[LabeledSample]):
    x = np.array([d.rho for d in data], dtype=float)
    y = np.array([1.0 if d.s == 1 else -1.0 for d in data])
    return x, y


def _scaling(x: np.ndarray, bounds=None):
    """Per-dimension affine map onto [0,1]; degenerate spans map to 0.5."""
    if bounds is not None:
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
    else:
        lo = x.min(axis=0)
        hi = x.max(axis=0)
    span = hi - lo
    span[span <= 0] = 1.0
    return lo, span


def _rbf(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    d2 = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


def _median_gamma(xs: np.ndarray) -> float:
    d2 = (np.sum(xs * xs, axis=1)[:, None] + np.sum(xs * xs, axis=1)[None, :]
          - 2.0 * xs @ xs.T)
    iu = np.triu_indices(len(xs), 1)
    med = float(np.median(np.sqrt(np.maximum(d2[iu], 0.0))))
    if med <= 0.0:
        return 1.0
    return 1.0 / (2.0 * med * med)


# ---------------------------------------------------------------------------
# dual solver

def _smo(k: np.ndarray, y: np.ndarray, c: float, tol: float,
         max_sweeps: int = 10000):
    """Pairwise coordinate ascent on the soft-margin dual.

    Maintains sum(alpha*y) = 0 and the box 0 <= alpha <= c; terminates
    when no multiplier violates the KKT conditions beyond tol.
    """
    n = len(y)
    alpha = np.zeros(n)
    bias = 0.0
    # err[i] = decision(x_i) - y_i
    err = -y.copy()
    eps = 1e-12

    def take_step(i1: int, i2: int) -> bool:
        nonlocal bias, err
        if i1 == i2:
            return False
        a1, a2 = alpha[i1], alpha[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = err[i1], err[i2]
        s = y1 * y2
        if s < 0:
            lo, hi = max(0.0, a2 - a1), min(c, c + a2 - a1)
        else:
            lo, hi = max(0.0, a1 + a2 - c), min(c, a1 + a2)
        if hi - lo < eps:
            return False
        k11, k12, k22 = k[i1, i1], k[i1, i2], k[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > eps:
            a2new = a2 + y2 * (e1 - e2) / eta
            a2new = min(max(a2new, lo), hi)
        else:
            # flat direction: evaluate the dual objective at both ends
            f1 = y1 * (e1 + bias) - a1 * k11 - s * a2 * k12
            f2 = y2 * (e2 + bias) - s * a1 * k12 - a2 * k22
            l1 = a1 + s * (a2 - lo)
            h1 = a1 + s * (a2 - hi)
            obj_lo = (l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11
                      + 0.5 * lo * lo * k22 + s * lo * l1 * k12)
            obj_hi = (h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11
                      + 0.5 * hi * hi * k22 + s * hi * h1 * k12)
            if obj_lo < obj_hi - eps:
                a2new = lo
            elif obj_lo > obj_hi + eps:
                a2new = hi
            else:
                a2new = a2
        if abs(a2new - a2) < eps * (a2new + a2 + eps):
            return False
        a1new = a1 + s * (a2 - a2new)
        if a1new < 1e-10:
            a1new = 0.0
        elif a1new > c - 1e-10:
            a1new = c
        d1 = y1 * (a1new - a1)
        d2 = y2 * (a2new - a2)
        b1 = bias - (e1 + d1 * k11 + d2 * k12)
        b2 = bias - (e2 + d1 * k12 + d2 * k22)
        if 0.0 < a1new < c:
            bnew = b1
        elif 0.0 < a2new < c:
            bnew = b2
        else:
            bnew = 0.5 * (b1 + b2)
        err += d1 * k[i1] + d2 * k[i2] + (bnew - bias)
        bias = bnew
        alpha[i1], alpha[i2] = a1new, a2new
        return True

    def examine(i2: int) -> bool:
        r2 = err[i2] * y[i2]
        if not ((r2 < -tol and alpha[i2] < c) or (r2 > tol and alpha[i2] > 0)):
            return False
        nb = np.flatnonzero((alpha > 0) & (alpha < c))
        if len(nb) > 1:
            i1 = nb[int(np.argmax(np.abs(err[nb] - err[i2])))]
            if take_step(int(i1), i2):
                return True
        for i1 in np.roll(nb, -(i2 % max(len(nb), 1))):
            if take_step(int(i1), i2):
                return True
        for i1 in np.roll(np.arange(n), -(i2 + 1)):
            if take_step(int(i1), i2):
                return True
        return False

    examine_all = True
    for _ in range(max_sweeps):
        changed = 0
        if examine_all:
            idx = range(n)
        else:
            idx = np.flatnonzero((alpha > 0) & (alpha < c))
        for i in idx:
            changed += examine(int(i))
        if examine_all:
            examine_all = False
            if changed == 0:
                break
        elif changed == 0:
            examine_all = True
    else:
        raise NumericalError("dual solver failed to reach KKT tolerance")
    return alpha, bias


# ---------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class SvmModel:
    """Uncalibrated decision model; coordinates are unit-hypercube scaled."""
    sv: np.ndarray
    coef: np.ndarray
    bias: float
    gamma: float
    lo: np.ndarray
    span: np.ndarray

    def decision(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        xs = (pts - self.lo) / self.span
        return _rbf(xs, self.sv, self.gamma) @ self.coef + self.bias


@dataclass(frozen=True)
class CalibratedSvm:
    """Decision model plus sigmoid posterior P(s=1|f) = 1/(1+exp(a f + b)).

    const_prob set marks a degenerate single-class model that ignores
    the input entirely.
    """
    sv: np.ndarray
    coef: np.ndarray
    bias: float
    gamma: float
    lo: np.ndarray
    span: np.ndarray
    a: float
    b: float
    const_prob: Optional[float] = None

    @classmethod
    def constant(cls, p: float, dim: int) -> "CalibratedSvm":
        return cls(sv=np.zeros((0, dim)), coef=np.zeros(0), bias=0.0,
                   gamma=1.0, lo=np.zeros(dim), span=np.ones(dim),
                   a=0.0, b=0.0, const_prob=float(p))

    @property
    def degenerate(self) -> bool:
        return self.const_prob is not None

    def decision(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        xs = (pts - self.lo) / self.span
        return _rbf(xs, self.sv, self.gamma) @ self.coef + self.bias

    def predict(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.const_prob is not None:
            p = np.full(len(pts), self.const_prob)
        else:
            f = self.decision(pts)
            z = self.a * f + self.b
            p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)),
                         1.0 / (1.0 + np.exp(z)))
        return np.clip(p, _P_FLOOR, _P_CEIL)

    def to_dict(self) -> dict:
        return {
            "kind": "calibrated_svm",
            "support_vectors": self.sv.tolist(),
            "dual_coef": self.coef.tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
            "scale_lo": self.lo.tolist(),
            "scale_span": self.span.tolist(),
            "sigmoid_a": self.a,
            "sigmoid_b": self.b,
            "const_prob": self.const_prob,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibratedSvm":
        if d.get("kind") != "calibrated_svm":
            raise ValidationError("not a serialized classifier document")
        return cls(
            sv=np.array(d["support_vectors"], dtype=float).reshape(
                len(d["support_vectors"]), -1) if d["support_vectors"]
            else np.zeros((0, len(d["scale_lo"]))),
            coef=np.array(d["dual_coef"], dtype=float),
            bias=float(d["bias"]), gamma=float(d["gamma"]),
            lo=np.array(d["scale_lo"], dtype=float),
            span=np.array(d["scale_span"], dtype=float),
            a=float(d["sigmoid_a"]), b=float(d["sigmoid_b"]),
            const_prob=(None if d.get("const_prob") is None
                        else float(d["const_prob"])),
        )


def save_model(model: CalibratedSvm, path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=1)


def load_model(path) -> CalibratedSvm:
    with open(path) as fh:
        return CalibratedSvm.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# training

def train_svm(data: Sequence[LabeledSample], c_box: float = C_BOX_DEFAULT,
              bounds=None, gamma: Optional[float] = None) -> SvmModel:
    """Soft-margin RBF SVM on unit-hypercube-scaled inputs.

    bounds: optional per-dimension (lo, hi) pairs fixing the scaling;
    otherwise the data envelope is used.  gamma: kernel width override;
    default is the median-pairwise-distance heuristic in scaled space.
    """
    if len(data) < 2:
        raise ValidationError("need at least 2 samples to train")
    x, y = _as_matrix(data)
    if len(set(y)) < 2:
        raise ValidationError(
            "single-class data; use a constant-probability model instead")
    lo, span = _scaling(x, bounds)
    xs = (x - lo) / span
    if gamma is None:
        gamma = _median_gamma(xs)
    k = _rbf(xs, xs, gamma)
    alpha, bias = _smo(k, y, c_box, KKT_TOL)
    keep = alpha > 1e-10
    return SvmModel(sv=xs[keep].copy(), coef=(alpha * y)[keep],
                    bias=bias, gamma=gamma, lo=lo, span=span)


def _platt_fit(f: np.ndarray, y: np.ndarray, tol: float = 1e-10,
               max_iter: int = 200):
    """MLE of sigmoid parameters on decision values, Newton with
    backtracking.  Targets carry the standard (N+1)/(N+2) smoothing."""
    n_pos = int(np.sum(y > 0))
    n_neg = len(y) - n_pos
    hi_t = (n_pos + 1.0) / (n_pos + 2.0)
    lo_t = 1.0 / (n_neg + 2.0)
    t = np.where(y > 0, hi_t, lo_t)

    def nll(a, b):
        z = a * f + b
        # log(1+exp(z)) - t*(-z)... stable cross-entropy in terms of z
        return float(np.sum(np.where(
            z >= 0, t * z + np.log1p(np.exp(-z)),
            (t - 1.0) * z + np.log1p(np.exp(z)))))

    a = 0.0
    b = np.log((n_neg + 1.0) / (n_pos + 1.0))
    fval = nll(a, b)
    sigma = 1e-12
    for _ in range(max_iter):
        z = a * f + b
        p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)),
                     1.0 / (1.0 + np.exp(z)))
        d1 = t - p
        g_a = float(np.sum(d1 * f))
        g_b = float(np.sum(d1))
        if max(abs(g_a), abs(g_b)) < tol:
            break
        w = p * (1.0 - p)
        h11 = float(np.sum(w * f * f)) + sigma
        h22 = float(np.sum(w)) + sigma
        h12 = float(np.sum(w * f))
        det = h11 * h22 - h12 * h12
        if det <= 0:
            raise NumericalError("sigmoid fit Hessian is singular")
        da = -(h22 * g_a - h12 * g_b) / det
        db = -(-h12 * g_a + h11 * g_b) / det
        step = 1.0
        gd = g_a * da + g_b * db
        while step >= 1e-10:
            cand = nll(a + step * da, b + step * db)
            if cand <= fval + 1e-4 * step * gd:
                break
            step *= 0.5
        else:
            break
        a += step * da
        b += step * db
        fval = cand
    return a, b


def calibrate(model: SvmModel, data: Sequence[LabeledSample]) -> CalibratedSvm:
    """Fit the posterior sigmoid on the model's decision values."""
    x, y = _as_matrix(data)
    if len(set(y)) < 2:
        raise ValidationError("calibration needs both classes")
    f = model.decision(x)
    if np.ptp(f) < 1e-14:
        raise NumericalError(
            "all decision values identical; likelihood is degenerate")
    a, b = _platt_fit(f, y)
    return CalibratedSvm(sv=model.sv, coef=model.coef, bias=model.bias,
                         gamma=model.gamma, lo=model.lo, span=model.span,
                         a=a, b=b)


def predict_prob(svm: CalibratedSvm, rho):
    """Stability probability at one point (scalar) or a batch (array)."""
    arr = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("query point must be finite")
    p = svm.predict(arr)
    return float(p[0]) if arr.ndim == 1 else p
