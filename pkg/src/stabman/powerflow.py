"""Steady-state network solution.

Newton-Raphson power flow in polar coordinates on the system per-unit base.
Impedance loads, shunt capacitors, and transformer magnetizing branches
live inside the bus admittance matrix, so the only injections are devices:

* slack bus: voltage magnitude and angle fixed;
* pv bus (synchronous machine): active power and voltage magnitude fixed;
* pq bus with a converter device: active power fixed, reactive power a
  declining linear function of local voltage (the reactive droop);
* pq bus without a device: zero injection.

Thevenin sources with nonzero impedance are expanded into a hidden
fixed-voltage bus behind a series branch before solving, so downstream
consumers see ideal sources only.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, replace

import numpy as np

from . import netmodel as nm
from .errors import NumericalError, ValidationError


def expand_sources(net: nm.NetworkModel) -> nm.NetworkModel:
    """Rewrite impedance-type thevenin devices as an ideal source on a
    hidden bus ``<id>__src`` behind an explicit series branch.

    Idempotent on networks without such devices.  Ideal thevenin devices
    (r = x = 0) must already sit on a slack bus.
    """
    buses = list(net.buses)
    branches = list(net.branches)
    devices = []
    changed = False
    for d in net.devices:
        if d.kind != nm.THEVENIN:
            devices.append(d)
            continue
        t = d.thevenin
        if t.r == 0 and t.x == 0:
            if net.bus(d.bus).role != "slack":
                raise ValidationError(
                    f"ideal source {d.id} must sit on a slack bus")
            devices.append(d)
            continue
        host = net.bus(d.bus)
        src_id = f"{d.id}__src"
        if host.role == "slack":
            # voltage is pinned behind the impedance, not at the terminal
            buses[buses.index(host)] = replace(host, role="pq")
        buses.append(nm.Bus(id=src_id, role="slack",
                            base_voltage=host.base_voltage, v_ref=t.v))
        branches.append(nm.Branch(
            id=f"{d.id}__z", kind="pi_line", terminals=(src_id, d.bus),
            params={"r": t.r, "x": t.x, "b_total": 0.0}))
        devices.append(replace(
            d, bus=src_id, thevenin=nm.TheveninParams(r=0.0, x=0.0, v=t.v)))
        changed = True
    if not changed:
        return net
    return nm.NetworkModel(frequency_hz=net.frequency_hz,
                           power_base_mva=net.power_base_mva,
                           buses=tuple(buses), branches=tuple(branches),
                           devices=tuple(devices))


def _transformer_two_port(params: dict) -> np.ndarray:
    """2x2 admittance of the T-model with the midpoint node eliminated.

    The magnetizing leg is a parallel r_m || j x_m shunt at the midpoint.
    """
    y1 = 1.0 / complex(params["r1"], params["x1"])
    y2 = 1.0 / complex(params["r2"], params["x2"])
    ym = 1.0 / params["r_m"] + 1.0 / complex(0.0, params["x_m"])
    den = y1 + y2 + ym
    return np.array([[y1 - y1 * y1 / den, -y1 * y2 / den],
                     [-y1 * y2 / den, y2 - y2 * y2 / den]], dtype=complex)


def build_ybus(net: nm.NetworkModel, scenario: nm.Scenario) -> np.ndarray:
    """Passive bus admittance matrix, scenario multipliers applied to
    loads and shunt capacitor banks.  Devices are not included."""
    idx = net.bus_index()
    n = len(net.buses)
    y = np.zeros((n, n), dtype=complex)
    for br in net.branches:
        if br.kind == "pi_line":
            a, b = (idx[t] for t in br.terminals)
            ys = 1.0 / complex(br.params["r"], br.params["x"])
            ysh = 0.5j * br.params["b_total"]
            y[a, a] += ys + ysh
            y[b, b] += ys + ysh
            y[a, b] -= ys
            y[b, a] -= ys
        elif br.kind == "transformer":
            a, b = (idx[t] for t in br.terminals)
            y2p = _transformer_two_port(br.params)
            y[np.ix_((a, b), (a, b))] += y2p
        elif br.kind == "rl_load":
            k = idx[br.terminals[0]]
            mult = scenario.load_mult(br.terminals[0])
            y[k, k] += mult / complex(br.params["r"], br.params["x"])
        elif br.kind == "shunt_cap":
            k = idx[br.terminals[0]]
            mult = scenario.shunt_mult(br.terminals[0])
            y[k, k] += 1j * br.params["b"] * mult
    return y


def quasi_static_admittance(net: nm.NetworkModel, scenario: nm.Scenario,
                            exclude_devices: tuple = ()):
    """Admittance matrix for short-circuit style calculations.

    Passive network plus machine subtransient shunts and thevenin source
    impedances; converter devices are open.  Buses held by an ideal
    (zero-impedance) source are grounded, i.e. removed.  Returns the
    reduced matrix and the set of grounded bus ids, row order following
    ``net.buses`` with grounded entries dropped.
    """
    y = build_ybus(net, scenario)
    idx = net.bus_index()
    grounded = set()
    for d in net.devices:
        if d.id in exclude_devices or not scenario.is_available(d.id):
            continue
        if d.kind == nm.SG:
            y_dev = 1.0 / complex(d.sg.r_s, d.sg.x_d_st)
            y[idx[d.bus], idx[d.bus]] += y_dev * d.mva_base() / net.power_base_mva
        elif d.kind == nm.THEVENIN:
            t = d.thevenin
            if t.r == 0 and t.x == 0:
                grounded.add(d.bus)
            else:
                y[idx[d.bus], idx[d.bus]] += 1.0 / complex(t.r, t.x)
    keep = [i for i, b in enumerate(net.buses) if b.id not in grounded]
    return y[np.ix_(keep, keep)], grounded


@dataclass(frozen=True)
class PowerFlowSolution:
    """Converged network state on the expanded bus set."""

    net: nm.NetworkModel          # expanded network actually solved
    scenario: nm.Scenario
    bus_order: tuple
    v: np.ndarray                 # complex bus voltages, aligned to bus_order
    ybus: np.ndarray              # passive admittance used
    iterations: int
    max_mismatch: float

    @property
    def voltage(self) -> dict:
        return {b: self.v[i] for i, b in enumerate(self.bus_order)}

    def injection_current(self, bus_id: str) -> complex:
        """Current a device must feed into the network at this bus so
        Kirchhoff holds against the passive network, system pu."""
        i = self.bus_order.index(bus_id)
        return complex((self.ybus @ self.v)[i])

    def injection_power(self, bus_id: str) -> complex:
        i = self.bus_order.index(bus_id)
        return complex(self.v[i] * np.conj((self.ybus @ self.v)[i]))


def _injection_spec(net: nm.NetworkModel, scenario: nm.Scenario):
    """Per-bus (p_spec, q0, k_q) in system pu; k_q > 0 marks droop buses."""
    n = len(net.buses)
    idx = net.bus_index()
    p = np.zeros(n)
    q0 = np.zeros(n)
    kq = np.zeros(n)
    vref_q = np.ones(n)
    for d in net.devices:
        if not scenario.is_available(d.id) or d.kind == nm.THEVENIN:
            continue
        k = idx[d.bus]
        disp = scenario.dispatch.get(d.id)
        if disp is not None:
            p[k] += disp.p_mw / net.power_base_mva
        if d.kind == nm.IBR:
            _, ctrl, _ = d.ibr
            scale = d.mva_base() / net.power_base_mva
            q0[k] += ctrl.q_ref * scale
            kq[k] += ctrl.droop_q * scale
            vref_q[k] = disp.v_ref if disp is not None else ctrl.v_d_ref
    return p, q0, kq, vref_q


def solve_power_flow(net: nm.NetworkModel, scenario: nm.Scenario | None = None,
                     tol: float = 1e-8, max_iter: int = 50) -> PowerFlowSolution:
    """Newton-Raphson solution from a flat start.

    Raises :class:`NumericalError` if the iteration does not reach ``tol``
    (infinity norm of the power mismatch, system pu) within ``max_iter``
    steps or produces non-finite iterates.
    """
    if scenario is None:
        scenario = nm.nominal_scenario(net)
    net = expand_sources(net)
    buses = net.buses
    n = len(buses)
    idx = net.bus_index()
    ybus = build_ybus(net, scenario)
    p_spec, q0, kq, vref_q = _injection_spec(net, scenario)

    # Effective bus types under this scenario: a pv bus whose machine is
    # out of service behaves as a plain pq bus.
    pv_on = set()
    vmag_ref = np.array([b.v_ref for b in buses])
    for d in net.devices:
        if d.kind == nm.SG and scenario.is_available(d.id) \
                and net.bus(d.bus).role == "pv":
            pv_on.add(idx[d.bus])
            disp = scenario.dispatch.get(d.id)
            if disp is not None:
                vmag_ref[idx[d.bus]] = disp.v_ref
    slack = [i for i, b in enumerate(buses) if b.role == "slack"]
    if not slack:
        raise ValidationError("no slack bus after source expansion")
    ang_unknown = [i for i in range(n) if i not in slack]
    mag_unknown = [i for i in ang_unknown if i not in pv_on]

    theta = np.zeros(n)
    vmag = np.ones(n)
    for i in slack:
        vmag[i] = vmag_ref[i]
    for i in pv_on:
        vmag[i] = vmag_ref[i]

    iterations = 0
    mismatch = np.inf
    for iterations in range(1, max_iter + 1):
        v = vmag * np.exp(1j * theta)
        i_inj = ybus @ v
        s = v * np.conj(i_inj)
        q_spec = q0 + kq * (vref_q - vmag)
        dp = p_spec - s.real
        dq = q_spec - s.imag
        resid = np.concatenate([dp[ang_unknown], dq[mag_unknown]])
        mismatch = float(np.max(np.abs(resid))) if resid.size else 0.0
        if not np.isfinite(mismatch):
            raise NumericalError("power flow produced non-finite iterates")
        if mismatch < tol:
            return PowerFlowSolution(
                net=net, scenario=scenario,
                bus_order=tuple(b.id for b in buses), v=v, ybus=ybus,
                iterations=iterations - 1, max_mismatch=mismatch)

        # dS/dtheta and dS/d|V| in complex form.
        dv = np.diag(v)
        ds_dth = 1j * (np.diag(v * np.conj(i_inj)) - dv @ np.conj(ybus) @ np.conj(dv))
        unit = np.diag(v / vmag)
        ds_dvm = np.diag(np.conj(i_inj)) @ unit + dv @ np.conj(ybus @ unit)

        j11 = ds_dth[np.ix_(ang_unknown, ang_unknown)].real
        j12 = ds_dvm[np.ix_(ang_unknown, mag_unknown)].real
        j21 = ds_dth[np.ix_(mag_unknown, ang_unknown)].imag
        j22 = ds_dvm[np.ix_(mag_unknown, mag_unknown)].imag
        # Voltage-dependent reactive spec shifts the QV diagonal.
        j22 = j22 + np.diag(kq[mag_unknown])
        jac = np.block([[j11, j12], [j21, j22]])
        try:
            step = np.linalg.solve(jac, resid)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular power-flow Jacobian: {exc}") from exc
        theta[ang_unknown] += step[:len(ang_unknown)]
        vmag[mag_unknown] += step[len(ang_unknown):]
        if np.any(vmag <= 0):
            raise NumericalError("power flow voltage collapsed below zero")

    raise NumericalError(
        f"power flow did not converge in {max_iter} iterations "
        f"(max mismatch {mismatch:.3e} pu)")
