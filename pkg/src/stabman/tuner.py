"""Loop-metric gates and constrained gain tuning.

Closed-form open-loop models for the three converter loops give
crossover frequencies and phase margins (bw_pm); engineering conditions
on them carve the region of practical interest out of the gain box
(rpi_region); and a derivative-free surrogate search minimizes the
worst-case spectral abscissa subject to those gates (tune).

Loop models, under ideal-source and perfect-decoupling assumptions:
  current loop   L_i(s)   = (k_p_i + k_i_i/s) / (L s + R),  L = l/omega_nom
  PLL loop       L_pll(s) = (k_p_pll + k_i_pll/s) * V_d0 / s
  dc loop        L_dc(s)  = (k_p_dc + k_i_dc/s) * G_dc(s)
with G_dc = k_pq/(v_dc0 * tau_dc * s) when the loop regulates v_dc and
G_dc = 2*k_pq/(tau_dc * s) when it regulates v_dc^2 (the operating-point
voltage cancels in the energy form).  Derivations in docs/control_loops.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .asm import ParameterDomain
from .errors import ValidationError
from .netmodel import IbrControlParams, IbrPhysicalParams
from .stability import TUNABLE_FIELDS, CaseContext, pssa

__all__ = [
    "PlantData", "LoopMetrics", "TunerProblem", "TunerResult",
    "SurrogateResult", "bw_pm", "rpi_ok", "rpi_region",
    "surrogate_optimize", "tune",
]

PM_MIN_DEG = 45.0
BW_SEP = 10.0
_W_LO, _W_HI = 1e-2, 1e6


@dataclass(frozen=True)
class PlantData:
    """Operating-point constants the loop models need."""
    r: float
    l: float
    omega_nom: float
    v_d0: float = 1.0
    tau_dc: float = 0.01
    v_dc0: float = 1.0

    @classmethod
    def from_unit(cls, phys: IbrPhysicalParams, omega_nom: float,
                  v_d0: float = 1.0, v_dc0: float = 1.0) -> "PlantData":
        return cls(r=phys.r, l=phys.l, omega_nom=omega_nom, v_d0=v_d0,
                   tau_dc=phys.c * phys.v_base_dc ** 2 / phys.s_base,
                   v_dc0=v_dc0)


@dataclass(frozen=True)
class LoopMetrics:
    """Crossovers (rad/s) and phase margins (deg); None = never crosses."""
    w_c_i: Optional[float]
    w_c_pll: Optional[float]
    w_c_dc: Optional[float]
    pm_i: Optional[float]
    pm_pll: Optional[float]
    pm_dc: Optional[float]

    def as_dict(self) -> dict:
        return {"w_c_i": self.w_c_i, "w_c_pll": self.w_c_pll,
                "w_c_dc": self.w_c_dc, "pm_i": self.pm_i,
                "pm_pll": self.pm_pll, "pm_dc": self.pm_dc}


def _crossover(resp: Callable) -> tuple:
    """Largest unity-gain crossing of |resp(j w)| in the scan range.

    resp maps an angular-frequency array to complex loop values.
    Returns (w_c, phase_margin_deg) or (None, None).
    """
    w = np.logspace(np.log10(_W_LO), np.log10(_W_HI), 1201)
    mag = np.abs(resp(w))
    if not np.any(mag > 0.0):
        return None, None
    lg = np.where(mag > 0.0, np.log(np.maximum(mag, 1e-300)), -np.inf)
    sign = lg >= 0.0
    idx = np.flatnonzero(sign[:-1] != sign[1:])
    if idx.size == 0:
        return None, None
    k = idx[-1]

    def f(logw):
        return float(np.log(np.abs(resp(np.array([np.exp(logw)]))[0])))

    w_c = float(np.exp(brentq(f, np.log(w[k]), np.log(w[k + 1]),
                              xtol=1e-15, rtol=1e-15)))
    val = resp(np.array([w_c]))[0]
    pm = 180.0 + np.degrees(np.arctan2(val.imag, val.real))
    if pm > 180.0:
        pm -= 360.0
    return w_c, float(pm)


def _pi(k_p: float, k_i: float, w: np.ndarray) -> np.ndarray:
    return k_p + k_i / (1j * w)


def bw_pm(ctrl: IbrControlParams, plant: PlantData) -> LoopMetrics:
    """Crossover frequency and phase margin of each control loop."""
    for name, v in (("r", plant.r), ("l", plant.l),
                    ("omega_nom", plant.omega_nom),
                    ("v_d0", plant.v_d0), ("tau_dc", plant.tau_dc),
                    ("v_dc0", plant.v_dc0)):
        if not (np.isfinite(v) and v > 0):
            raise ValidationError(f"plant {name} must be positive")
    l_sec = plant.l / plant.omega_nom

    def loop_i(w):
        return _pi(ctrl.k_p_i, ctrl.k_i_i, w) / (l_sec * 1j * w + plant.r)

    def loop_pll(w):
        return _pi(ctrl.k_p_pll, ctrl.k_i_pll, w) * plant.v_d0 / (1j * w)

    if ctrl.dc_variant == "vdc":
        kp_dc, ki_dc = ctrl.k_p_dc, ctrl.k_i_dc
        g_dc = ctrl.k_pq / (plant.v_dc0 * plant.tau_dc)
    else:
        kp_dc, ki_dc = ctrl.k_p_2dc, ctrl.k_i_2dc
        g_dc = 2.0 * ctrl.k_pq / plant.tau_dc

    def loop_dc(w):
        return _pi(kp_dc, ki_dc, w) * g_dc / (1j * w)

    w_i, pm_i = _crossover(loop_i)
    w_pll, pm_pll = _crossover(loop_pll)
    w_dc, pm_dc = _crossover(loop_dc)
    return LoopMetrics(w_i, w_pll, w_dc, pm_i, pm_pll, pm_dc)


def rpi_ok(metrics: LoopMetrics, omega_nom: float) -> bool:
    """C1: current loop at least 10x faster than the PLL; C2: dc loop
    below twice the grid frequency; C3: every margin above 45 deg.
    An absent crossover fails its condition."""
    m = metrics
    if m.w_c_i is None or m.w_c_pll is None or m.w_c_dc is None:
        return False
    if m.w_c_i < BW_SEP * m.w_c_pll:
        return False
    if m.w_c_dc > 2.0 * omega_nom:
        return False
    for pm in (m.pm_i, m.pm_pll, m.pm_dc):
        if pm is None or pm <= PM_MIN_DEG:
            return False
    return True


def rpi_region(pair: Sequence[str], fixed: IbrControlParams,
               bounds: Sequence[tuple], plant: PlantData,
               resolution: int) -> tuple:
    """Boolean RPI grid over two gains, the rest held at `fixed`.

    Returns (axis0, axis1, mask) with mask[i, j] for (axis0[i], axis1[j]).
    """
    if len(pair) != 2 or len(bounds) != 2:
        raise ValidationError("rpi_region varies exactly two gains")
    unknown = set(pair) - TUNABLE_FIELDS
    if unknown:
        raise ValidationError(f"unknown gain fields {sorted(unknown)}")
    if resolution < 2:
        raise ValidationError("grid resolution must be at least 2")
    ax0 = np.linspace(bounds[0][0], bounds[0][1], resolution)
    ax1 = np.linspace(bounds[1][0], bounds[1][1], resolution)
    mask = np.zeros((resolution, resolution), dtype=bool)
    for i, v0 in enumerate(ax0):
        for j, v1 in enumerate(ax1):
            ctrl = replace(fixed, **{pair[0]: float(v0), pair[1]: float(v1)})
            mask[i, j] = rpi_ok(bw_pm(ctrl, plant), plant.omega_nom)
    return ax0, ax1, mask


# ---------------------------------------------------------------------------
# surrogate optimization

@dataclass(frozen=True)
class SurrogateResult:
    x: np.ndarray
    value: float
    constraints: np.ndarray
    feasible: bool
    evaluations: int
    history_x: np.ndarray
    history_f: np.ndarray


def _lhs(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """Latin hypercube on the unit box: one sample per stratum per axis."""
    cells = np.stack([rng.permutation(n) for _ in range(dim)], axis=-1)
    return (cells + rng.random((n, dim))) / n


def _rbf_fit(xs: np.ndarray, vals: np.ndarray):
    """Cubic RBF interpolant with a linear polynomial tail."""
    n, d = xs.shape
    dist = np.linalg.norm(xs[:, None, :] - xs[None, :, :], axis=-1)
    phi = dist ** 3
    p = np.hstack([np.ones((n, 1)), xs])
    k = np.block([[phi, p], [p.T, np.zeros((d + 1, d + 1))]])
    rhs = np.concatenate([vals, np.zeros(d + 1)])
    try:
        sol = np.linalg.solve(k, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.solve(k + 1e-10 * np.eye(len(k)), rhs)
    lam, c = sol[:n], sol[n:]

    def predict(q: np.ndarray) -> np.ndarray:
        dq = np.linalg.norm(q[:, None, :] - xs[None, :, :], axis=-1)
        return dq ** 3 @ lam + c[0] + q @ c[1:]

    return predict


_CYCLE = (0.3, 0.5, 0.8, 0.95)


def surrogate_optimize(objective: Callable, constraints: Optional[Callable],
                       domain: ParameterDomain, budget: int,
                       seed: int = 0) -> SurrogateResult:
    """Derivative-free constrained search over the box.

    Seeded Latin-hypercube start of size 2(dim+1); a cubic RBF models a
    merit made of the normalized objective plus a normalized penalty on
    positive constraint values; candidates mix local perturbations of
    the incumbent with uniform draws, scored by a cycling weight between
    surrogate value and distance to evaluated points.  Returns the best
    feasible evaluated point, else the least-violating one, flagged.
    """
    dim = domain.dim
    n0 = 2 * (dim + 1)
    if budget < n0:
        raise ValidationError(
            f"budget {budget} below the initial design size {n0}")
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in domain.bounds])
    hi = np.array([b[1] for b in domain.bounds])
    span = hi - lo

    def evaluate(x):
        f = float(objective(x))
        g = (np.asarray(constraints(x), dtype=float)
             if constraints is not None else np.zeros(0))
        return f, g

    xs_s = _lhs(rng, n0, dim)
    xs = lo + xs_s * span
    evals = [evaluate(x) for x in xs]
    fs = np.array([e[0] for e in evals])
    gs = np.array([e[1] for e in evals])

    n_cand = max(60 * dim, 120)
    it = 0
    while len(fs) < budget:
        # merit from raw history, capped so failed points stay ranked last
        f_fin = fs[np.isfinite(fs)]
        f_ref = (f_fin.max() - f_fin.min() + 1.0) if f_fin.size else 1.0
        f_cap = (f_fin.max() if f_fin.size else 0.0) + 2.0 * f_ref
        f_use = np.where(np.isfinite(fs), fs, f_cap)
        f_n = (f_use - f_use.min()) / max(np.ptp(f_use), 1e-300)
        if gs.shape[1]:
            g_use = np.where(np.isfinite(gs), gs, 1e6)
            scale = np.maximum(np.abs(g_use).max(axis=0), 1e-12)
            viol = np.maximum(g_use / scale, 0.0).sum(axis=1)
        else:
            viol = np.zeros(len(fs))
        merit = f_n + 10.0 * viol

        model = _rbf_fit((xs - lo) / span, merit)
        inc = (xs[int(np.argmin(merit))] - lo) / span
        local = inc + rng.normal(0.0, 0.1, (n_cand // 2, dim))
        unif = rng.random((n_cand - n_cand // 2, dim))
        cand = np.clip(np.vstack([local, unif]), 0.0, 1.0)
        # drop candidates colliding with evaluated points
        dmat = np.linalg.norm(cand[:, None, :] - (xs - lo) / span,
                              axis=-1)
        dmin = dmat.min(axis=1)
        keep = dmin > 1e-9
        if not keep.any():
            keep = np.ones(len(cand), dtype=bool)
        cand, dmin = cand[keep], dmin[keep]
        s_hat = model(cand)
        s_n = (s_hat - s_hat.min()) / max(np.ptp(s_hat), 1e-300)
        d_n = dmin / max(dmin.max(), 1e-300)
        w = _CYCLE[it % len(_CYCLE)]
        score = w * s_n + (1.0 - w) * (1.0 - d_n)
        pick = lo + cand[int(np.argmin(score))] * span

        f, g = evaluate(pick)
        xs = np.vstack([xs, pick])
        fs = np.append(fs, f)
        gs = np.vstack([gs, g]) if gs.shape[1] else np.zeros((len(fs), 0))
        it += 1

    feas = np.all(gs <= 1e-9, axis=1) & np.isfinite(fs)
    if feas.any():
        cand_idx = np.flatnonzero(feas)
        best = cand_idx[int(np.argmin(fs[cand_idx]))]
        feasible = True
    else:
        g_use = np.where(np.isfinite(gs), gs, 1e6)
        scale = np.maximum(np.abs(g_use).max(axis=0), 1e-12)
        total = np.maximum(g_use / scale, 0.0).sum(axis=1)
        best = int(np.argmin(total))
        feasible = False
    return SurrogateResult(x=xs[best].copy(), value=float(fs[best]),
                           constraints=gs[best].copy(), feasible=feasible,
                           evaluations=len(fs), history_x=xs,
                           history_f=fs)


# ---------------------------------------------------------------------------
# end-to-end tuning

@dataclass(frozen=True)
class TunerProblem:
    contexts: tuple
    domain: ParameterDomain
    plant: PlantData
    ctrl_base: IbrControlParams
    eps: float = 1e-3
    budget: int = 120
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValidationError("eps must be positive")
        if not self.contexts:
            raise ValidationError("need at least one connection combination")
        unknown = set(self.domain.names) - TUNABLE_FIELDS
        if unknown:
            raise ValidationError(f"unknown gain fields {sorted(unknown)}")


@dataclass(frozen=True)
class TunerResult:
    rho: dict
    alpha_max: float
    metrics: LoopMetrics
    feasible: bool
    evaluations: int
    constraint_values: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": "tuner_result", "rho": dict(self.rho),
                "alpha_max": self.alpha_max,
                "metrics": self.metrics.as_dict(),
                "feasible": self.feasible,
                "evaluations": self.evaluations,
                "constraints": dict(self.constraint_values)}


_ABSENT = 1e3  # violation stand-in for a loop that never crosses unity


def _gate_values(metrics: LoopMetrics, omega_nom: float) -> dict:
    m = metrics
    c1 = (BW_SEP * m.w_c_pll - m.w_c_i
          if m.w_c_i is not None and m.w_c_pll is not None else _ABSENT)
    c2 = (m.w_c_dc - 2.0 * omega_nom if m.w_c_dc is not None else _ABSENT)
    out = {"bw_separation": float(c1), "dc_bw_cap": float(c2)}
    for tag, pm in (("pm_i", m.pm_i), ("pm_pll", m.pm_pll),
                    ("pm_dc", m.pm_dc)):
        out[tag] = float(PM_MIN_DEG - pm) if pm is not None else _ABSENT
    return out


def tune(problem: TunerProblem) -> TunerResult:
    """Minimize the worst-case spectral abscissa over the gain box,
    subject to damping (alpha <= -eps) and the RPI gates C1-C3."""
    dom = problem.domain
    contexts = list(problem.contexts)
    cache: dict = {}

    def at(x) -> tuple:
        key = tuple(float(v) for v in x)
        if key not in cache:
            rho = dict(zip(dom.names, key))
            alpha = pssa(rho, contexts, threads=problem.threads)
            metrics = bw_pm(replace(problem.ctrl_base, **rho), problem.plant)
            cache[key] = (alpha, metrics)
        return cache[key]

    def objective(x) -> float:
        return at(x)[0]

    def constraints(x) -> np.ndarray:
        alpha, metrics = at(x)
        gates = _gate_values(metrics, problem.plant.omega_nom)
        damping = alpha + problem.eps if np.isfinite(alpha) else _ABSENT
        return np.array([damping, *gates.values()])

    res = surrogate_optimize(objective, constraints, dom,
                             budget=problem.budget, seed=problem.seed)

    # exact re-verification at the returned point, bypassing the cache
    rho = dict(zip(dom.names, (float(v) for v in res.x)))
    alpha = pssa(rho, contexts, threads=problem.threads)
    metrics = bw_pm(replace(problem.ctrl_base, **rho), problem.plant)
    gates = _gate_values(metrics, problem.plant.omega_nom)
    report = {"damping": (alpha + problem.eps
                          if np.isfinite(alpha) else float("inf"))}
    report.update(gates)
    feasible = all(v <= 1e-9 for v in report.values())
    return TunerResult(rho=rho, alpha_max=float(alpha), metrics=metrics,
                       feasible=feasible, evaluations=res.evaluations,
                       constraint_values=report)
