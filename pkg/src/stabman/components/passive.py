"""Passive network elements as linear subsystems.

Dynamics are written in the synchronous XY frame, states in per-unit and
time in seconds, so a per-unit reactance x becomes an inductance
x / omega_nom s and a susceptance b a capacitance b / omega_nom s.  The
frame rotation shows up as the +/- omega_nom cross coupling between the
X and Y components of every inductor current and capacitor voltage.
"""

from __future__ import annotations

import numpy as np

from .subsystem import Subsystem, i_pair, v_pair

_I2 = np.eye(2)


def _cross(omega_nom: float) -> np.ndarray:
    return np.array([[0.0, omega_nom], [-omega_nom, 0.0]])


def _pair_vals(z: complex):
    return [z.real, z.imag]


def series_rl(name: str, bus_a: str, bus_b: str, r: float, x: float,
              omega_nom: float, va0: complex, vb0: complex) -> Subsystem:
    """Series resistor-inductor branch; one current state pair a -> b."""
    i0 = (va0 - vb0) / complex(r, x)
    a = -(r / x) * omega_nom * _I2 + _cross(omega_nom)
    b = (omega_nom / x) * np.hstack([_I2, -_I2])
    c = np.vstack([_I2, _I2])
    d = np.zeros((4, 4))
    return Subsystem(
        name=name,
        state_labels=(f"{name}:i_X", f"{name}:i_Y"),
        inputs=v_pair(bus_a) + v_pair(bus_b),
        outputs=i_pair(bus_a, -1) + i_pair(bus_b, +1),
        a=a, b=b, c=c, d=d,
        x0=_pair_vals(i0),
        u0=_pair_vals(va0) + _pair_vals(vb0),
        y0=_pair_vals(i0) * 2,
    )


def rl_load(name: str, bus: str, r: float, x: float, omega_nom: float,
            v0: complex) -> Subsystem:
    """Impedance load to ground; draws its current from the bus."""
    i0 = v0 / complex(r, x)
    a = -(r / x) * omega_nom * _I2 + _cross(omega_nom)
    b = (omega_nom / x) * _I2
    return Subsystem(
        name=name,
        state_labels=(f"{name}:i_X", f"{name}:i_Y"),
        inputs=v_pair(bus),
        outputs=i_pair(bus, -1),
        a=a, b=b, c=_I2.copy(), d=np.zeros((2, 2)),
        x0=_pair_vals(i0), u0=_pair_vals(v0), y0=_pair_vals(i0),
    )


def bus_cap(name: str, bus: str, b_pu: float, omega_nom: float,
            v0: complex) -> Subsystem:
    """Lumped bus capacitance; the voltage definer at device-free buses.

    Consumes the signed current sum of every attached element.
    """
    i0 = 1j * b_pu * v0  # current the capacitor itself draws at equilibrium
    a = _cross(omega_nom)
    b = (omega_nom / b_pu) * _I2
    return Subsystem(
        name=name,
        state_labels=(f"{name}:v_X", f"{name}:v_Y"),
        inputs=i_pair(bus),
        outputs=v_pair(bus),
        a=a, b=b, c=_I2.copy(), d=np.zeros((2, 2)),
        x0=_pair_vals(v0), u0=_pair_vals(i0), y0=_pair_vals(v0),
    )


def transformer_t(name: str, bus_a: str, bus_b: str, params: dict,
                  omega_nom: float, va0: complex, vb0: complex) -> Subsystem:
    """Two-winding transformer, T model, magnetizing r_m || x_m.

    The midpoint node is eliminated: its voltage is r_m times the current
    imbalance, so no algebraic state remains.  Six states, two winding
    currents and the magnetizing inductor current, X/Y each.
    """
    r1, x1 = params["r1"], params["x1"]
    r2, x2 = params["r2"], params["x2"]
    rm, xm = params["r_m"], params["x_m"]
    w = omega_nom

    # Equilibrium from the static two-port.
    z1, z2 = complex(r1, x1), complex(r2, x2)
    ym = 1.0 / rm + 1.0 / complex(0.0, xm)
    # Node equation at the midpoint: (i1 - i2) = ym * vm with
    # i1 = (va - vm)/z1, i2 = (vm - vb)/z2.  The differences va - vm and
    # vm - vb are formed directly (not through vm) because the naive
    # subtraction cancels ~2 digits and the w*rm/x terms in the dynamics
    # amplify that loss past useful equilibrium quality.
    den = 1.0 / z1 + 1.0 / z2 + ym
    vm0 = (va0 / z1 + vb0 / z2) / den
    i10 = ((va0 - vb0) / z2 + va0 * ym) / (z1 * den)
    i20 = ((va0 - vb0) / z1 - vb0 * ym) / (z2 * den)
    il0 = vm0 / complex(0.0, xm)

    # States ordered [i1_X, i1_Y, i2_X, i2_Y, il_X, il_Y].
    a = np.zeros((6, 6))
    b = np.zeros((6, 4))
    # d i1 = (w/x1)(va - vm - r1 i1) + cross, vm = rm (i1 - i2 - il)
    for blk, (gain, rser) in enumerate(((w / x1, r1), (w / x2, r2),
                                        (w / xm, 0.0))):
        sl = slice(2 * blk, 2 * blk + 2)
        sgn = -1.0 if blk == 0 else 1.0  # vm enters winding 1 negatively
        a[sl, 0:2] += sgn * gain * rm * _I2
        a[sl, 2:4] += -sgn * gain * rm * _I2
        a[sl, 4:6] += -sgn * gain * rm * _I2
        a[sl, sl] += -gain * rser * _I2 + _cross(w)
    b[0:2, 0:2] = (w / x1) * _I2
    b[2:4, 2:4] = -(w / x2) * _I2

    c = np.zeros((4, 6))
    c[0:2, 0:2] = _I2
    c[2:4, 2:4] = _I2
    return Subsystem(
        name=name,
        state_labels=tuple(f"{name}:{s}" for s in
                           ("i1_X", "i1_Y", "i2_X", "i2_Y", "im_X", "im_Y")),
        inputs=v_pair(bus_a) + v_pair(bus_b),
        outputs=i_pair(bus_a, -1) + i_pair(bus_b, +1),
        a=a, b=b, c=c, d=np.zeros((4, 4)),
        x0=_pair_vals(i10) + _pair_vals(i20) + _pair_vals(il0),
        u0=_pair_vals(va0) + _pair_vals(vb0),
        y0=_pair_vals(i10) + _pair_vals(i20),
    )


def stiff_source(name: str, bus: str, v0: complex) -> Subsystem:
    """Ideal voltage source: zero states, zero-deviation voltage output."""
    return Subsystem(
        name=name,
        state_labels=(),
        inputs=(),
        outputs=v_pair(bus),
        a=np.zeros((0, 0)), b=np.zeros((0, 0)),
        c=np.zeros((2, 0)), d=np.zeros((2, 0)),
        x0=np.zeros(0), u0=np.zeros(0), y0=_pair_vals(v0),
    )
