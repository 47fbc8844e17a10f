"""Reference-frame rotations between the synchronous XY frame and device
dq frames.

Machine convention: ``delta`` is the angle of the rotor q-axis measured
from the global X axis, so at delta = 0 a phasor 1+0j has v_q = 1.
Converter convention: ``theta`` is the angle of the controller d-axis, so
at lock the PCC voltage is purely d.
"""

from __future__ import annotations

import cmath


def to_machine(z: complex, delta: float) -> tuple:
    """Global phasor -> (d, q) machine components."""
    w = 1j * cmath.exp(-1j * delta) * z
    return w.real, w.imag


def from_machine(d: float, q: float, delta: float) -> complex:
    return -1j * cmath.exp(1j * delta) * complex(d, q)


def to_local(z: complex, theta: float) -> tuple:
    """Global phasor -> (d, q) converter components."""
    w = cmath.exp(-1j * theta) * z
    return w.real, w.imag


def from_local(d: float, q: float, theta: float) -> complex:
    return cmath.exp(1j * theta) * complex(d, q)
