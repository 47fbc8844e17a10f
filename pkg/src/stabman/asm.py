"""Adaptive sampling of the stability boundary in controller gain space.

A binary stability oracle is expensive (one call screens every scenario
of a study case), so the sampling budget is spent in two rounds: a
uniform seed set, then a refinement batch placed where the first
calibrated classifier is least certain, i.e. nearest the target
probability level.  The refined model is the exported stability map.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .classifier import CalibratedSvm, LabeledSample, calibrate, train_svm
from .csvio import write_csv
from .errors import ValidationError
from .svgplot import heatmap_svg, write_svg

__all__ = [
    "ParameterDomain", "AsmConfig", "ManifoldModel", "GridExport",
    "run_asm", "select_boundary_candidates", "export_manifold",
]


@dataclass(frozen=True)
class ParameterDomain:
    """Axis-aligned box of tunable gains, all values pu."""
    names: tuple
    bounds: tuple

    def __post_init__(self):
        if len(self.names) != len(self.bounds) or not self.names:
            raise ValidationError("domain needs one (name, bounds) per axis")
        for nm, (lo, hi) in zip(self.names, self.bounds):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValidationError(f"bad bounds for {nm}: [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.names)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return lo + rng.random((n, self.dim)) * (hi - lo)

    def grid_axes(self, resolution: int):
        return [np.linspace(lo, hi, resolution) for lo, hi in self.bounds]


@dataclass(frozen=True)
class AsmConfig:
    n_init: int = 100
    n_r: int = 20000
    n_a: int = 250
    p_th: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.n_init < 2:
            raise ValidationError("n_init must be at least 2")
        if self.n_a < 1:
            raise ValidationError("n_a must be at least 1")
        if self.n_r < 10 * self.n_init:
            raise ValidationError(
                f"candidate pool n_r={self.n_r} must be >= 10*n_init")
        if self.n_a > self.n_r:
            raise ValidationError("n_a cannot exceed the candidate pool")
        if not 0.0 < self.p_th < 1.0:
            raise ValidationError("p_th must lie strictly in (0,1)")


@dataclass(frozen=True)
class ManifoldModel:
    """Calibrated stability-probability map plus everything that made it."""
    model: CalibratedSvm
    samples: np.ndarray
    labels: np.ndarray
    domain: ParameterDomain
    config: AsmConfig
    oracle_calls: int
    degenerate: bool = False

    def predict(self, points) -> np.ndarray:
        return self.model.predict(points)

    def to_dict(self) -> dict:
        return {
            "kind": "manifold_model",
            "classifier": self.model.to_dict(),
            "samples": self.samples.tolist(),
            "labels": self.labels.tolist(),
            "domain": {"names": list(self.domain.names),
                       "bounds": [list(b) for b in self.domain.bounds]},
            "config": {"n_init": self.config.n_init, "n_r": self.config.n_r,
                       "n_a": self.config.n_a, "p_th": self.config.p_th,
                       "seed": self.config.seed},
            "oracle_calls": self.oracle_calls,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ManifoldModel":
        if d.get("kind") != "manifold_model":
            raise ValidationError("not a serialized manifold document")
        dom = ParameterDomain(tuple(d["domain"]["names"]),
                              tuple(tuple(b) for b in d["domain"]["bounds"]))
        return cls(model=CalibratedSvm.from_dict(d["classifier"]),
                   samples=np.array(d["samples"], dtype=float).reshape(
                       len(d["samples"]), dom.dim),
                   labels=np.array(d["labels"], dtype=int),
                   domain=dom, config=AsmConfig(**d["config"]),
                   oracle_calls=int(d["oracle_calls"]),
                   degenerate=bool(d["degenerate"]))


def _label_batch(oracle: Callable, points: np.ndarray, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(lambda p: oracle(p), points))
    else:
        out = [oracle(p) for p in points]
    lab = np.array([int(v) for v in out])
    if not np.isin(lab, (0, 1)).all():
        raise ValidationError("oracle must return 0 or 1")
    return lab


def _fit(samples: np.ndarray, labels: np.ndarray,
         domain: ParameterDomain) -> CalibratedSvm:
    data = [LabeledSample(tuple(p), int(s)) for p, s in zip(samples, labels)]
    return calibrate(train_svm(data, bounds=domain.bounds), data)


def select_boundary_candidates(model: CalibratedSvm, pool, p_th: float,
                               n_a: int) -> np.ndarray:
    """The n_a pool points whose predicted probability is nearest p_th.

    Ordered by distance; exact ties resolve to the lower pool index.
    """
    pool = np.asarray(pool, dtype=float)
    if len(pool) < n_a:
        raise ValidationError("candidate pool smaller than n_a")
    dist = np.abs(model.predict(pool) - p_th)
    idx = np.argsort(dist, kind="stable")[:n_a]
    return pool[idx]


def run_asm(oracle: Callable, domain: ParameterDomain, cfg: AsmConfig,
            threads: int = 1) -> ManifoldModel:
    """Seed, label, train, refine at the probability boundary, retrain.

    The oracle runs exactly cfg.n_init + cfg.n_a times, except when the
    seed round comes back single-class: then no boundary exists in the
    box and a constant-probability model is returned after n_init calls.
    """
    rng = np.random.default_rng(cfg.seed)
    g_init = domain.sample(rng, cfg.n_init)
    lab_init = _label_batch(oracle, g_init, threads)

    if lab_init.min() == lab_init.max():
        # smoothed single-class prior rather than a hard 0/1
        n = cfg.n_init
        p = (n + 1.0) / (n + 2.0) if lab_init[0] == 1 else 1.0 / (n + 2.0)
        return ManifoldModel(
            model=CalibratedSvm.constant(p, domain.dim),
            samples=g_init, labels=lab_init, domain=domain, config=cfg,
            oracle_calls=cfg.n_init, degenerate=True)

    first = _fit(g_init, lab_init, domain)
    pool = domain.sample(rng, cfg.n_r)
    chosen = select_boundary_candidates(first, pool, cfg.p_th, cfg.n_a)
    lab_a = _label_batch(oracle, chosen, threads)

    samples = np.vstack([g_init, chosen])
    labels = np.concatenate([lab_init, lab_a])
    final = _fit(samples, labels, domain)
    return ManifoldModel(model=final, samples=samples, labels=labels,
                         domain=domain, config=cfg,
                         oracle_calls=cfg.n_init + cfg.n_a)


@dataclass(frozen=True)
class GridExport:
    axes: tuple
    points: np.ndarray
    probs: np.ndarray
    in_rpi: np.ndarray

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)


def export_manifold(manifold: ManifoldModel, resolution: int,
                    rpi_mask: Optional[Callable] = None,
                    csv_path=None, svg_path=None,
                    markers: Sequence[tuple] = ()) -> GridExport:
    """Evaluate the probability map on a regular grid.

    rpi_mask: predicate on a single point; False marks the point as
    outside the region of practical interest (probability still
    reported, flag cleared).  SVG output requires a 2-D domain.
    """
    if resolution < 2:
        raise ValidationError("grid resolution must be at least 2")
    dom = manifold.domain
    axes = dom.grid_axes(resolution)
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    probs = manifold.predict(points)
    if rpi_mask is None:
        in_rpi = np.ones(len(points), dtype=bool)
    else:
        in_rpi = np.array([bool(rpi_mask(p)) for p in points])

    if csv_path is not None:
        header = list(dom.names) + ["probability", "in_rpi"]
        rows = ([*p, float(q), bool(m)]
                for p, q, m in zip(points, probs, in_rpi))
        write_csv(csv_path, header, rows)

    if svg_path is not None:
        if dom.dim != 2:
            raise ValidationError("SVG export needs a 2-D domain")
        grid = probs.reshape(resolution, resolution)
        mask = in_rpi.reshape(resolution, resolution)
        svg = heatmap_svg(
            axes[0], axes[1], grid,
            contour_level=manifold.config.p_th,
            mask=None if rpi_mask is None else mask,
            markers=markers,
            xlabel=dom.names[0], ylabel=dom.names[1],
            title="stability probability")
        write_svg(svg_path, svg)

    return GridExport(axes=tuple(axes), points=points, probs=probs,
                      in_rpi=in_rpi)
