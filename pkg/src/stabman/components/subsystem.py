"""Linear state-space subsystem with typed ports.

Interconnection contract (synchronous XY frame, system per-unit base):

* A *voltage definer* at bus K outputs the pair ``(v, K, X/Y)`` and may
  consume the pair ``(i, K, X/Y)``, the total current flowing into it from
  the attached elements.
* A *current element* consumes ``(v, K, X/Y)`` for each terminal bus and
  outputs ``(i, K, X/Y)`` with a sign: -1 where its reference current
  leaves the bus (from-side, shunt), +1 where it enters the bus (to-side).
  A definer's current input is the sign-weighted sum of those outputs.
* Reference inputs (set-points, dc sources) are ``ext`` signals addressed
  by label; they stay exposed on the assembled system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KIND_V = "v"
KIND_I = "i"
KIND_EXT = "ext"


@dataclass(frozen=True)
class Signal:
    kind: str
    bus: str | None = None
    axis: str | None = None
    sign: int = 1
    label: str = ""

    def key(self):
        return (self.kind, self.bus, self.axis)


def v_pair(bus: str):
    return (Signal(KIND_V, bus, "X"), Signal(KIND_V, bus, "Y"))


def i_pair(bus: str, sign: int = 1):
    return (Signal(KIND_I, bus, "X", sign), Signal(KIND_I, bus, "Y", sign))


def ext(label: str):
    return Signal(KIND_EXT, label=label)


@dataclass
class Subsystem:
    """dx/dt = A(x-x0) + B(u-u0), y = y0 + C(x-x0) + D(u-u0).

    ``x0``/``u0``/``y0`` anchor the linearization; state_labels are fully
    qualified (``"G9:delta"``).  ``spec_name``/``params`` point back at the
    symbolic dynamics for nonlinear residual checks, None for elements
    that are linear by construction.
    """

    name: str
    state_labels: tuple
    inputs: tuple
    outputs: tuple
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    x0: np.ndarray
    u0: np.ndarray
    y0: np.ndarray
    spec_name: str | None = None
    params: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        n, m, p = len(self.state_labels), len(self.inputs), len(self.outputs)
        self.a = np.asarray(self.a, dtype=float).reshape(n, n)
        self.b = np.asarray(self.b, dtype=float).reshape(n, m)
        self.c = np.asarray(self.c, dtype=float).reshape(p, n)
        self.d = np.asarray(self.d, dtype=float).reshape(p, m)
        self.x0 = np.asarray(self.x0, dtype=float).reshape(n)
        self.u0 = np.asarray(self.u0, dtype=float).reshape(m)
        self.y0 = np.asarray(self.y0, dtype=float).reshape(p)

    @property
    def n_states(self) -> int:
        return len(self.state_labels)

    def defined_bus(self) -> str | None:
        """Bus whose voltage this subsystem pins, if any."""
        for s in self.outputs:
            if s.kind == KIND_V:
                return s.bus
        return None
