"""Operating-point initialization and modular interconnection.

Pipeline: normalize sources, drop out-of-service devices and the stubs
they leave behind, solve the power flow, back-solve every subsystem's
internal equilibrium from its network-consistent terminal quantities, and
close the block-diagonal collection through the structural wiring matrix.

The interconnection solves u = K y + E u_ext with y = C x + D u, giving

    A_cl = A + B K (I - D K)^-1 C

and the matching input/output maps.  A singular I - D K means two ports
fight algebraically (for example two ideal sources at one bus through
zero impedance) and raises :class:`AlgebraicLoopError` naming the
subsystems involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import netmodel as nm
from . import powerflow as pf
from .components import lin as _lin
from .components import (
    KIND_EXT, KIND_I, KIND_V, Subsystem,
    build_ibr, build_sg, bus_cap, rl_load, series_rl, stiff_source,
    transformer_t,
)
from .components.sg import SG_SPEC
from .components.ibr import IBR_SPECS
from .errors import AlgebraicLoopError, ValidationError

_SPECS = {SG_SPEC.name: SG_SPEC,
          **{s.name: s for s in IBR_SPECS.values()}}


# ---------------------------------------------------------------------------
# scenario-dependent topology

def prune_unserved(net: nm.NetworkModel, scenario: nm.Scenario) -> nm.NetworkModel:
    """Remove out-of-service devices and any stub left without a voltage
    source: a device-free, capacitance-free bus hanging on one series
    branch loses that branch.  A bare junction that cannot be pruned is a
    modeling error and raises."""
    devices = [d for d in net.devices if scenario.is_available(d.id)]
    branches = [br for br in net.branches
                if not (br.kind == "rl_load"
                        and scenario.load_mult(br.terminals[0]) == 0.0)
                and not (br.kind == "shunt_cap"
                         and scenario.shunt_mult(br.terminals[0]) == 0.0)]
    buses = list(net.buses)
    while True:
        dev_buses = {d.bus for d in devices}
        cap_buses = set()
        series_at = {}
        load_at = set()
        for br in branches:
            if br.kind == "shunt_cap":
                cap_buses.add(br.terminals[0])
            elif br.kind == "rl_load":
                load_at.add(br.terminals[0])
            else:
                if br.kind == "pi_line" and br.params["b_total"] > 0:
                    cap_buses.update(br.terminals)
                for t in br.terminals:
                    series_at.setdefault(t, []).append(br)
        changed = False
        for bus in list(buses):
            if bus.id in dev_buses or bus.id in cap_buses:
                continue
            series = series_at.get(bus.id, [])
            if bus.id in load_at or len(series) > 1:
                raise ValidationError(
                    f"no voltage source at bus {bus.id}: junction needs a "
                    "device or shunt capacitance")
            buses.remove(bus)
            for br in series:
                branches.remove(br)
            changed = True
        if not changed:
            break
    return nm.NetworkModel(frequency_hz=net.frequency_hz,
                           power_base_mva=net.power_base_mva,
                           buses=tuple(buses), branches=tuple(branches),
                           devices=tuple(devices))


@dataclass(frozen=True)
class PreparedCase:
    """Pruned, source-expanded network with its converged power flow."""

    net: nm.NetworkModel
    scenario: nm.Scenario
    solution: pf.PowerFlowSolution


def prepare_case(net: nm.NetworkModel, scenario: nm.Scenario | None = None,
                 pf_tol: float = 1e-12) -> PreparedCase:
    if scenario is None:
        scenario = nm.nominal_scenario(net)
    net_x = prune_unserved(pf.expand_sources(net), scenario)
    sol = pf.solve_power_flow(net_x, scenario, tol=pf_tol)
    return PreparedCase(net=net_x, scenario=scenario, solution=sol)


# ---------------------------------------------------------------------------
# subsystem construction

def device_subsystem(case: PreparedCase, dev: nm.Device,
                     control_override: nm.IbrControlParams | None = None
                     ) -> Subsystem:
    sol = case.solution
    v0 = sol.voltage[dev.bus]
    i_inj = sol.injection_current(dev.bus)
    w = case.net.omega_nom
    s_sys = case.net.power_base_mva
    if dev.kind == nm.SG:
        return build_sg(dev, v0, i_inj, s_sys, w)
    if dev.kind == nm.IBR:
        disp = case.scenario.dispatch.get(dev.id)
        v_ref = disp.v_ref if disp is not None else None
        return build_ibr(dev, v0, i_inj, s_sys, w,
                         v_ref_droop=v_ref, control_override=control_override)
    t = dev.thevenin
    if t.r != 0 or t.x != 0:
        raise ValidationError(
            f"device {dev.id}: unexpanded thevenin source in assembly")
    return stiff_source(dev.id, dev.bus, v0)


def passive_subsystems(case: PreparedCase) -> list:
    """Branch subsystems plus one merged capacitance per bus, in a fixed
    deterministic order (branches by id, then capacitor pools by bus)."""
    net, sc, sol = case.net, case.scenario, case.solution
    w = net.omega_nom
    subs = []
    cap_pool: dict = {}
    for br in sorted(net.branches, key=lambda b: b.id):
        if br.kind == "pi_line":
            a, b = br.terminals
            if br.params["r"] > 0 or br.params["x"] > 0:
                subs.append(series_rl(br.id, a, b, br.params["r"],
                                      br.params["x"], w,
                                      sol.voltage[a], sol.voltage[b]))
            half = br.params["b_total"] / 2.0
            if half > 0:
                cap_pool[a] = cap_pool.get(a, 0.0) + half
                cap_pool[b] = cap_pool.get(b, 0.0) + half
        elif br.kind == "transformer":
            a, b = br.terminals
            subs.append(transformer_t(br.id, a, b, br.params, w,
                                      sol.voltage[a], sol.voltage[b]))
        elif br.kind == "rl_load":
            bus = br.terminals[0]
            mult = sc.load_mult(bus)
            if mult < 0:
                raise ValidationError(f"negative load multiplier at {bus}")
            if mult > 0:
                subs.append(rl_load(br.id, bus, br.params["r"] / mult,
                                    br.params["x"] / mult, w,
                                    sol.voltage[bus]))
        elif br.kind == "shunt_cap":
            bus = br.terminals[0]
            mult = sc.shunt_mult(bus)
            if mult < 0:
                raise ValidationError(f"negative shunt multiplier at {bus}")
            cap_pool[bus] = cap_pool.get(bus, 0.0) + br.params["b"] * mult
    for bus in sorted(cap_pool):
        if cap_pool[bus] > 0:
            subs.append(bus_cap(f"cap_{bus}", bus, cap_pool[bus], w,
                                sol.voltage[bus]))
    return subs


# ---------------------------------------------------------------------------
# interconnection

@dataclass
class AssembledSystem:
    """Closed-loop small-signal model around a consistent equilibrium."""

    a: np.ndarray
    b: np.ndarray                # columns follow input_labels
    c: np.ndarray                # rows follow output_labels
    d: np.ndarray
    state_labels: tuple
    input_labels: tuple          # external (reference) inputs
    output_labels: tuple
    x0: np.ndarray
    u0: np.ndarray               # external inputs at the equilibrium
    y0: np.ndarray
    subsystems: tuple

    @property
    def n_states(self) -> int:
        return len(self.state_labels)

    def output_index(self, label: str) -> int:
        return self.output_labels.index(label)


def _signal_label(sub: Subsystem, sig) -> str:
    if sig.kind == KIND_EXT:
        return sig.label
    if sig.kind == KIND_V:
        return f"v:{sig.bus}:{sig.axis}"
    return f"i:{sub.name}:{sig.bus}:{sig.axis}"


def interconnect(subsystems) -> AssembledSystem:
    subs = list(subsystems)
    if not subs:
        raise ValidationError("nothing to interconnect")

    # Stack block-diagonal matrices.
    a = scipy.linalg.block_diag(*[s.a for s in subs])
    b = scipy.linalg.block_diag(*[s.b for s in subs])
    c = scipy.linalg.block_diag(*[s.c for s in subs])
    d = scipy.linalg.block_diag(*[s.d for s in subs])
    x0 = np.concatenate([s.x0 for s in subs]) if subs else np.zeros(0)
    y0 = np.concatenate([s.y0 for s in subs])
    state_labels = tuple(l for s in subs for l in s.state_labels)

    # Index the stacked ports.
    out_index: dict = {}
    out_meta = []
    v_owner: dict = {}
    for s in subs:
        for sig in s.outputs:
            j = len(out_meta)
            out_meta.append((s, sig))
            if sig.kind == KIND_V:
                key = (sig.bus, sig.axis)
                if key in v_owner:
                    raise ValidationError(
                        f"conflicting voltage definitions at bus {sig.bus}: "
                        f"{v_owner[key][0].name} and {s.name}")
                v_owner[key] = (s, j)
            out_index.setdefault(sig.key(), []).append((j, sig.sign))

    ext_labels = []
    in_meta = []
    for s in subs:
        for sig in s.inputs:
            in_meta.append((s, sig))
            if sig.kind == KIND_EXT:
                ext_labels.append(sig.label)

    n_u, n_y, n_e = len(in_meta), len(out_meta), len(ext_labels)
    k = np.zeros((n_u, n_y))
    e = np.zeros((n_u, n_e))
    ext_pos = {lab: i for i, lab in enumerate(ext_labels)}
    u0_full = np.concatenate([s.u0 for s in subs]) if n_u else np.zeros(0)
    for row, (s, sig) in enumerate(in_meta):
        if sig.kind == KIND_EXT:
            e[row, ext_pos[sig.label]] = 1.0
        elif sig.kind == KIND_V:
            owner = v_owner.get((sig.bus, sig.axis))
            if owner is None:
                raise ValidationError(
                    f"no voltage source at bus {sig.bus} "
                    f"(required by {s.name})")
            k[row, owner[1]] = 1.0
        else:  # current summation into the bus definer
            for j, sign in out_index.get((KIND_I, sig.bus, sig.axis), []):
                k[row, j] += float(sign)

    f = np.eye(n_y) - d @ k
    # Solve through LU; a rank drop is an algebraic loop.
    cond_ok = np.linalg.cond(f) < 1e12 if n_y else True
    if not cond_ok:
        _, sv, vt = np.linalg.svd(f)
        weights = np.abs(vt[-1])
        cut = 0.1 * weights.max() if weights.size else 0.0
        names = sorted({out_meta[j][0].name
                        for j in np.nonzero(weights >= cut)[0]})
        raise AlgebraicLoopError(names)
    f_inv_c = np.linalg.solve(f, c)
    f_inv_de = np.linalg.solve(f, d @ e)

    a_cl = a + b @ k @ f_inv_c
    b_cl = b @ (k @ f_inv_de + e)
    u0_ext = np.array([u0_full[row] for row, (s, sig) in enumerate(in_meta)
                       if sig.kind == KIND_EXT])
    return AssembledSystem(
        a=a_cl, b=b_cl, c=f_inv_c, d=f_inv_de,
        state_labels=state_labels,
        input_labels=tuple(ext_labels),
        output_labels=tuple(_signal_label(s, sig) for s, sig in out_meta),
        x0=x0, u0=u0_ext, y0=y0,
        subsystems=tuple(subs),
    )


def assemble(net: nm.NetworkModel, scenario: nm.Scenario | None = None,
             control_overrides: dict | None = None,
             pf_tol: float = 1e-12) -> AssembledSystem:
    """Full pipeline: power flow, per-subsystem equilibria, interconnection.

    ``control_overrides`` maps device id to a replacement
    :class:`~stabman.netmodel.IbrControlParams` record.
    """
    case = prepare_case(net, scenario, pf_tol=pf_tol)
    return assemble_prepared(case, control_overrides)


def assemble_prepared(case: PreparedCase,
                      control_overrides: dict | None = None,
                      passive_cache: list | None = None) -> AssembledSystem:
    overrides = control_overrides or {}
    unknown = set(overrides) - {d.id for d in case.net.devices}
    if unknown:
        raise ValidationError(f"control overrides for unknown devices {sorted(unknown)}")
    subs = [device_subsystem(case, dev, overrides.get(dev.id))
            for dev in sorted(case.net.devices, key=lambda d: d.id)]
    subs.extend(passive_cache if passive_cache is not None
                else passive_subsystems(case))
    return interconnect(subs)


# ---------------------------------------------------------------------------
# equilibrium quality

def equilibrium_residual(asys: AssembledSystem) -> float:
    """Worst per-state drift |dx/dt| over all subsystems with every input
    taken from the assembled, wired equilibrium (nonlinear models are
    evaluated through their original equations, not the linearization)."""
    # Reconstruct the wired subsystem inputs from equilibrium outputs.
    k, e_mat, u0_full = _wiring(asys)
    u_wired = k @ asys.y0 + e_mat @ asys.u0 if u0_full.size else u0_full
    worst = 0.0
    ui = 0
    for s in asys.subsystems:
        m = len(s.inputs)
        u_s = u_wired[ui:ui + m]
        ui += m
        if s.n_states == 0:
            continue
        if s.spec_name is not None:
            spec = _SPECS[s.spec_name]
            params = dict(zip(spec.param_names, s.params))
            dx = _lin.eval_dynamics(spec, s.x0, u_s, params)
        else:
            dx = s.a @ s.x0 + s.b @ u_s
            # Linear elements are affine around zero, so absolute values
            # feed straight through.
        worst = max(worst, float(np.max(np.abs(dx))) if dx.size else 0.0)
    return worst


def _wiring(asys: AssembledSystem):
    """Rebuild (K, E, stacked u0) for the stored subsystem tuple."""
    out_index: dict = {}
    v_owner: dict = {}
    j = 0
    for s in asys.subsystems:
        for sig in s.outputs:
            if sig.kind == KIND_V:
                v_owner[(sig.bus, sig.axis)] = j
            out_index.setdefault(sig.key(), []).append((j, sig.sign))
            j += 1
    n_y = j
    rows = []
    for s in asys.subsystems:
        for sig in s.inputs:
            rows.append(sig)
    n_u = len(rows)
    k = np.zeros((n_u, n_y))
    e = np.zeros((n_u, len(asys.input_labels)))
    ext_pos = {lab: i for i, lab in enumerate(asys.input_labels)}
    for row, sig in enumerate(rows):
        if sig.kind == KIND_EXT:
            e[row, ext_pos[sig.label]] = 1.0
        elif sig.kind == KIND_V:
            k[row, v_owner[(sig.bus, sig.axis)]] = 1.0
        else:
            for jj, sign in out_index.get((KIND_I, sig.bus, sig.axis), []):
                k[row, jj] += float(sign)
    u0_full = np.concatenate([s.u0 for s in asys.subsystems]) \
        if n_u else np.zeros(0)
    return k, e, u0_full
