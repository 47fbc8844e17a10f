"""Exact linearization of device dynamics.

Device equations are written once as plain Python over an injected math
backend, so the same function evaluates numerically (numpy) and builds the
symbolic Jacobians (sympy).  Compiled Jacobian callables take the full
parameter vector as an argument and are cached per dynamics family; a
parameter change (controller retuning, operating point) never re-derives
or re-compiles anything.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace
from typing import Callable

import numpy as np
import sympy as sp

_NUMPY = SimpleNamespace(sin=np.sin, cos=np.cos, sqrt=np.sqrt)
_SYMPY = SimpleNamespace(sin=sp.sin, cos=sp.cos, sqrt=sp.sqrt)


@dataclass(frozen=True)
class DynamicsSpec:
    """One nonlinear model family: dx/dt = f(x, u; p), y = g(x, u; p)."""

    name: str
    state_names: tuple
    input_names: tuple
    output_names: tuple
    param_names: tuple
    f: Callable
    g: Callable


@dataclass(frozen=True)
class Linearization:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    f0: np.ndarray  # dx/dt at the expansion point (residual)
    y0: np.ndarray


_COMPILED: dict = {}


def _compile(spec: DynamicsSpec):
    xs = [sp.Symbol(f"x_{n}", real=True) for n in spec.state_names]
    us = [sp.Symbol(f"u_{n}", real=True) for n in spec.input_names]
    ps = [sp.Symbol(f"p_{n}", real=True) for n in spec.param_names]
    pns = SimpleNamespace(**dict(zip(spec.param_names, ps)))
    fx = sp.Matrix(spec.f(xs, us, pns, _SYMPY))
    gx = sp.Matrix(spec.g(xs, us, pns, _SYMPY))
    mats = {
        "a": fx.jacobian(xs),
        "b": fx.jacobian(us),
        "c": gx.jacobian(xs),
        "d": gx.jacobian(us),
        "f": fx,
        "g": gx,
    }
    args = (tuple(xs), tuple(us), tuple(ps))
    return {k: sp.lambdify(args, m, modules="numpy", cse=True)
            for k, m in mats.items()}


def _compiled(spec: DynamicsSpec):
    fns = _COMPILED.get(spec.name)
    if fns is None:
        fns = _compile(spec)
        _COMPILED[spec.name] = fns
    return fns


def linearize(spec: DynamicsSpec, x0, u0, params: dict) -> Linearization:
    """Evaluate the exact Jacobians of ``spec`` at (x0, u0, params)."""
    fns = _compiled(spec)
    pv = tuple(float(params[n]) for n in spec.param_names)
    x0 = tuple(float(v) for v in x0)
    u0 = tuple(float(v) for v in u0)
    return Linearization(
        a=np.asarray(fns["a"](x0, u0, pv), dtype=float),
        b=np.asarray(fns["b"](x0, u0, pv), dtype=float),
        c=np.asarray(fns["c"](x0, u0, pv), dtype=float),
        d=np.asarray(fns["d"](x0, u0, pv), dtype=float),
        f0=np.asarray(fns["f"](x0, u0, pv), dtype=float).ravel(),
        y0=np.asarray(fns["g"](x0, u0, pv), dtype=float).ravel(),
    )


def _pns(spec: DynamicsSpec, params: dict) -> SimpleNamespace:
    return SimpleNamespace(**{n: float(params[n]) for n in spec.param_names})


def eval_dynamics(spec: DynamicsSpec, x, u, params: dict) -> np.ndarray:
    """Nonlinear state derivative, numeric path."""
    out = spec.f([float(v) for v in x], [float(v) for v in u],
                 _pns(spec, params), _NUMPY)
    return np.asarray(out, dtype=float)


def eval_outputs(spec: DynamicsSpec, x, u, params: dict) -> np.ndarray:
    out = spec.g([float(v) for v in x], [float(v) for v in u],
                 _pns(spec, params), _NUMPY)
    return np.asarray(out, dtype=float)
