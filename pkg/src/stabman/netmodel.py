"""Network data model: buses, branches, devices, scenarios.

Everything downstream (power flow, linearization, assembly) consumes the
types defined here.  Conventions:

* System quantities are per-unit on ``power_base_mva`` at ``frequency_hz``.
* Branch parameters are per-unit on the system base.
* Device parameters are per-unit on the device's own MVA base (``rating``
  for synchronous machines, ``n_units * s_base`` for converter units), with
  the bus voltage as the shared voltage base.  Thevenin sources are the one
  exception: their ``r``, ``x``, ``v`` are system-base per-unit.
* A converter device record stores single-unit parameters plus a unit
  count; :func:`aggregate_ibr` exposes the equivalent lumped parameter set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

SG = "SG"
IBR = "IBR"
THEVENIN = "thevenin_source"

DEVICE_KINDS = (SG, IBR, THEVENIN)
BRANCH_KINDS = ("pi_line", "transformer", "rl_load", "shunt_cap")
BUS_ROLES = ("slack", "pv", "pq")

_BRANCH_PARAM_KEYS = {
    "pi_line": ("r", "x", "b_total"),
    "transformer": ("r1", "x1", "r2", "x2", "r_m", "x_m"),
    "rl_load": ("r", "x"),
    "shunt_cap": ("b",),
}


@dataclass(frozen=True)
class Bus:
    id: str
    role: str
    base_voltage: float  # kV, line-to-line
    v_ref: float = 1.0  # pu voltage target for slack/pv buses


@dataclass(frozen=True)
class Branch:
    """Passive element. ``terminals`` has two bus ids for series kinds
    (pi_line, transformer) and one for shunt kinds (rl_load, shunt_cap)."""

    id: str
    kind: str
    terminals: tuple
    params: dict


@dataclass(frozen=True)
class GovernorParams:
    """Speed governor with a single-reheat steam turbine."""

    r_droop: float = 0.05  # pu speed droop
    t_sv: float = 0.1      # s, servo valve
    t_ch: float = 0.3      # s, steam chest
    t_rh: float = 7.0      # s, reheater
    f_hp: float = 0.3      # high-pressure power fraction


@dataclass(frozen=True)
class AvrParams:
    """Rotating-exciter voltage regulator (saturation disabled)."""

    k_a: float = 50.0
    t_a: float = 0.05
    k_e: float = 1.0
    t_e: float = 0.5
    k_f: float = 0.05
    t_f: float = 1.0
    t_r: float = 0.02


@dataclass(frozen=True)
class SgParams:
    """Sixth-order machine constants, per-unit on the machine base.

    ``_t`` marks transient, ``_st`` subtransient quantities.
    """

    x_d: float
    x_q: float
    x_d_t: float
    x_q_t: float
    x_d_st: float
    x_q_st: float
    x_l: float
    r_s: float
    t_d0_t: float
    t_q0_t: float
    t_d0_st: float
    t_q0_st: float
    h: float
    d_damp: float = 0.0
    governor: GovernorParams = field(default_factory=GovernorParams)
    avr: AvrParams = field(default_factory=AvrParams)


@dataclass(frozen=True)
class IbrPhysicalParams:
    """Single-unit converter hardware constants.

    ``r``, ``l``, ``c_f``, ``r_f`` are per-unit on (``s_base``,
    ``v_base_ac``); ``c`` is the dc capacitance in farad; ``i_dc`` the dc
    source current in ampere (``None`` means operating-point dependent,
    resolved by the power flow).
    """

    r: float
    l: float
    c_f: float
    r_f: float
    c: float
    s_base: float        # VA
    v_base_ac: float     # V
    v_base_dc: float     # V
    i_dc: float | None = None


@dataclass(frozen=True)
class IbrControlParams:
    """Controller gains and references for one converter unit.

    The dc-voltage loop regulates either v_dc (``dc_variant="vdc"``) or its
    square (``"vdc2"``); only the matching gain pair is active.  ``k_pq``
    scales the power-to-current transformation path.
    """

    k_p_pll: float
    k_i_pll: float
    k_p_i: float
    k_i_i: float
    k_p_dc: float = 0.0
    k_i_dc: float = 0.0
    k_p_2dc: float = 0.0
    k_i_2dc: float = 0.0
    dc_variant: str = "vdc"
    droop_p: float = 20.0      # pu power per pu frequency
    droop_q: float = 1.0 / 1.1  # pu reactive power per pu voltage
    k_pq: float = 1.0
    q_ref: float = 0.0
    v_dc_ref: float = 1.0
    v_d_ref: float = 1.0
    omega_ref: float = 1.0


@dataclass(frozen=True)
class TheveninParams:
    """Ideal source ``v`` behind ``r + jx``; system-base per-unit."""

    r: float
    x: float
    v: float


@dataclass(frozen=True)
class Device:
    id: str
    bus: str
    kind: str
    rating: float  # MVA
    sg: SgParams | None = None
    ibr: tuple | None = None  # (IbrPhysicalParams, IbrControlParams, n_units)
    thevenin: TheveninParams | None = None

    def mva_base(self) -> float:
        """Device per-unit MVA base."""
        if self.kind == IBR:
            phys, _, n = self.ibr
            return n * phys.s_base / 1e6
        return self.rating


@dataclass(frozen=True)
class NetworkModel:
    frequency_hz: float
    power_base_mva: float
    buses: tuple
    branches: tuple
    devices: tuple

    @property
    def omega_nom(self) -> float:
        return 2.0 * math.pi * self.frequency_hz

    def bus(self, bus_id: str) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def device(self, dev_id: str) -> Device:
        for d in self.devices:
            if d.id == dev_id:
                return d
        raise KeyError(dev_id)

    def bus_index(self) -> dict:
        return {b.id: i for i, b in enumerate(self.buses)}


@dataclass(frozen=True)
class Dispatch:
    p_mw: float
    v_ref: float


@dataclass(frozen=True)
class Scenario:
    """One operating condition: multipliers scale the admittance of loads
    and shunt capacitors at a bus; dispatch carries device set-points."""

    load_multipliers: dict
    shunt_multipliers: dict
    dispatch: dict  # device id -> Dispatch
    available: dict  # device id -> bool

    def is_available(self, dev_id: str) -> bool:
        return self.available.get(dev_id, True)

    def load_mult(self, bus_id: str) -> float:
        return self.load_multipliers.get(bus_id, 1.0)

    def shunt_mult(self, bus_id: str) -> float:
        return self.shunt_multipliers.get(bus_id, 1.0)


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple
    seed: int | None = None

    @property
    def n_s(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    def __len__(self):
        return len(self.scenarios)


def nominal_scenario(net: NetworkModel) -> Scenario:
    """Unit multipliers, proportional dispatch at nominal load."""
    return _dispatch_proportional(net, {b.id: 1.0 for b in net.buses},
                                  {b.id: 1.0 for b in net.buses}, {})


# ---------------------------------------------------------------------------
# validation

def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a positive finite number, got {value!r}")


def _nonnegative(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
        raise ValidationError(f"{name} must be a nonnegative finite number, got {value!r}")


def validate_network(net: NetworkModel) -> None:
    """Raise :class:`ValidationError` on structural or physical nonsense.

    Checked:  unique ids, known kinds/roles, dangling bus references,
    parameter completeness and sign constraints, exactly one angle
    reference, one voltage-defining element per bus, graph connectivity.
    """
    _positive("frequency_hz", net.frequency_hz)
    _positive("power_base_mva", net.power_base_mva)

    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate bus ids")
    if not ids:
        raise ValidationError("network has no buses")
    bus_set = set(ids)

    for b in net.buses:
        if b.role not in BUS_ROLES:
            raise ValidationError(f"bus {b.id}: unknown role {b.role!r}")
        _positive(f"bus {b.id} base_voltage", b.base_voltage)
        _positive(f"bus {b.id} v_ref", b.v_ref)

    br_ids = [br.id for br in net.branches]
    if len(set(br_ids)) != len(br_ids):
        raise ValidationError("duplicate branch ids")
    for br in net.branches:
        if br.kind not in BRANCH_KINDS:
            raise ValidationError(f"branch {br.id}: unknown kind {br.kind!r}")
        want = 2 if br.kind in ("pi_line", "transformer") else 1
        if len(br.terminals) != want:
            raise ValidationError(
                f"branch {br.id}: kind {br.kind} needs {want} terminal(s)")
        for t in br.terminals:
            if t not in bus_set:
                raise ValidationError(f"branch {br.id}: unknown bus {t!r}")
        keys = _BRANCH_PARAM_KEYS[br.kind]
        missing = [k for k in keys if k not in br.params]
        if missing:
            raise ValidationError(f"branch {br.id}: missing params {missing}")
        p = br.params
        if br.kind == "pi_line":
            _nonnegative(f"branch {br.id} r", p["r"])
            _positive(f"branch {br.id} x", p["x"])
            _nonnegative(f"branch {br.id} b_total", p["b_total"])
        elif br.kind == "transformer":
            for k in ("r1", "r2"):
                _nonnegative(f"branch {br.id} {k}", p[k])
            for k in ("x1", "x2", "r_m", "x_m"):
                _positive(f"branch {br.id} {k}", p[k])
        elif br.kind == "rl_load":
            _nonnegative(f"branch {br.id} r", p["r"])
            _positive(f"branch {br.id} x", p["x"])
            if p["r"] <= 0 and p["x"] <= 0:
                raise ValidationError(f"branch {br.id}: load impedance is zero")
        elif br.kind == "shunt_cap":
            _positive(f"branch {br.id} b", p["b"])

    dev_ids = [d.id for d in net.devices]
    if len(set(dev_ids)) != len(dev_ids):
        raise ValidationError("duplicate device ids")
    if set(dev_ids) & set(br_ids):
        raise ValidationError("device and branch ids overlap")
    for d in net.devices:
        if d.kind not in DEVICE_KINDS:
            raise ValidationError(f"device {d.id}: unknown kind {d.kind!r}")
        if d.bus not in bus_set:
            raise ValidationError(f"device {d.id}: unknown bus {d.bus!r}")
        if d.kind == THEVENIN:
            # idealized sources carry no nameplate
            _nonnegative(f"device {d.id} rating", d.rating)
        else:
            _positive(f"device {d.id} rating", d.rating)
        if d.kind == SG:
            if d.sg is None:
                raise ValidationError(f"device {d.id}: SG device needs sg params")
            _validate_sg(d.id, d.sg)
        elif d.kind == IBR:
            if d.ibr is None:
                raise ValidationError(f"device {d.id}: IBR device needs ibr params")
            _validate_ibr(d.id, *d.ibr)
        else:
            if d.thevenin is None:
                raise ValidationError(
                    f"device {d.id}: thevenin_source needs thevenin params")
            _nonnegative(f"device {d.id} thevenin.r", d.thevenin.r)
            _nonnegative(f"device {d.id} thevenin.x", d.thevenin.x)
            _positive(f"device {d.id} thevenin.v", d.thevenin.v)

    # Angle reference: one slack bus, or none but a lone impedance-type
    # thevenin source (its hidden internal node becomes the reference).
    slack = [b for b in net.buses if b.role == "slack"]
    thev_z = [d for d in net.devices
              if d.kind == THEVENIN and (d.thevenin.r > 0 or d.thevenin.x > 0)]
    if len(slack) > 1:
        raise ValidationError("more than one slack bus")
    if not slack and len(thev_z) != 1:
        raise ValidationError("no slack bus and no unique thevenin source")
    if slack:
        has_src = any(d.bus == slack[0].id and d.kind in (SG, THEVENIN)
                      for d in net.devices)
        if not has_src:
            raise ValidationError(
                f"slack bus {slack[0].id} has no SG or thevenin device")

    # One voltage-defining element per bus: a device, or shunt capacitance
    # (explicit bank or pi-line ends), never both, never two devices.
    dev_buses = [d.bus for d in net.devices]
    if len(set(dev_buses)) != len(dev_buses):
        raise ValidationError("two devices share a bus; one voltage source per bus")
    cap_buses = set()
    for br in net.branches:
        if br.kind == "shunt_cap":
            cap_buses.add(br.terminals[0])
        elif br.kind == "pi_line" and br.params["b_total"] > 0:
            cap_buses.update(br.terminals)
    clash = cap_buses & set(dev_buses)
    if clash:
        raise ValidationError(
            "bus(es) %s carry both a device and shunt capacitance; attach "
            "lines with charging to a separate bus" % sorted(clash))

    # Connectivity over series branches.
    if len(net.buses) > 1:
        adj = {b.id: set() for b in net.buses}
        for br in net.branches:
            if br.kind in ("pi_line", "transformer"):
                a, b = br.terminals
                adj[a].add(b)
                adj[b].add(a)
        seen = {ids[0]}
        stack = [ids[0]]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if seen != bus_set:
            raise ValidationError(
                "network graph is disconnected: unreachable buses %s"
                % sorted(bus_set - seen))


def _validate_sg(dev_id, sg: SgParams):
    for name in ("x_d", "x_q", "x_d_t", "x_q_t", "x_d_st", "x_q_st",
                 "t_d0_t", "t_q0_t", "t_d0_st", "t_q0_st", "h"):
        _positive(f"device {dev_id} sg.{name}", getattr(sg, name))
    _nonnegative(f"device {dev_id} sg.x_l", sg.x_l)
    _nonnegative(f"device {dev_id} sg.r_s", sg.r_s)
    _nonnegative(f"device {dev_id} sg.d_damp", sg.d_damp)
    if not (sg.x_d > sg.x_d_t > sg.x_d_st > sg.x_l):
        raise ValidationError(
            f"device {dev_id}: need x_d > x_d_t > x_d_st > x_l")
    if not (sg.x_q > sg.x_q_t > sg.x_q_st > sg.x_l):
        raise ValidationError(
            f"device {dev_id}: need x_q > x_q_t > x_q_st > x_l")
    g, a = sg.governor, sg.avr
    for name in ("r_droop", "t_sv", "t_ch", "t_rh"):
        _positive(f"device {dev_id} governor.{name}", getattr(g, name))
    if not 0.0 <= g.f_hp <= 1.0:
        raise ValidationError(f"device {dev_id}: governor.f_hp outside [0, 1]")
    for name in ("k_a", "t_a", "k_e", "t_e", "t_f", "t_r"):
        _positive(f"device {dev_id} avr.{name}", getattr(a, name))
    _nonnegative(f"device {dev_id} avr.k_f", a.k_f)


def _validate_ibr(dev_id, phys: IbrPhysicalParams, ctrl: IbrControlParams, n):
    if not (isinstance(n, int) and n >= 1):
        raise ValidationError(f"device {dev_id}: unit count must be an int >= 1")
    for name in ("r", "l", "c_f", "c", "s_base", "v_base_ac", "v_base_dc"):
        _positive(f"device {dev_id} ibr.{name}", getattr(phys, name))
    _nonnegative(f"device {dev_id} ibr.r_f", phys.r_f)
    if phys.i_dc is not None:
        _nonnegative(f"device {dev_id} ibr.i_dc", phys.i_dc)
    if ctrl.dc_variant not in ("vdc", "vdc2"):
        raise ValidationError(
            f"device {dev_id}: dc_variant must be 'vdc' or 'vdc2'")
    for name in ("k_p_pll", "k_i_pll", "k_p_i", "k_i_i", "k_p_dc", "k_i_dc",
                 "k_p_2dc", "k_i_2dc", "droop_p", "droop_q", "q_ref"):
        v = getattr(ctrl, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v)):
            raise ValidationError(f"device {dev_id}: ibr control {name} not finite")
        if name.startswith("k_") and v < 0:
            raise ValidationError(f"device {dev_id}: ibr control {name} negative")
    for name in ("k_pq", "v_dc_ref", "v_d_ref", "omega_ref"):
        _positive(f"device {dev_id} ibr control {name}", getattr(ctrl, name))
    active = (ctrl.k_p_dc, ctrl.k_i_dc) if ctrl.dc_variant == "vdc" \
        else (ctrl.k_p_2dc, ctrl.k_i_2dc)
    if active[0] == 0 and active[1] == 0:
        raise ValidationError(
            f"device {dev_id}: active dc loop ({ctrl.dc_variant}) has zero gains")


# ---------------------------------------------------------------------------
# aggregation

def aggregate_ibr(phys: IbrPhysicalParams, ctrl: IbrControlParams, n: int):
    """Lump ``n`` identical paralleled units into one equivalent record.

    The returned record stays per-unit on the *single-unit* base, so
    extensive hardware scales with ``n`` (sources, capacitances) while
    impedances divide by ``n``.  Gains on the current-forming paths scale
    with ``n``; voltage-loop references and the phase tracking loop do not.
    The third return value is the factor for external reference inputs.
    """
    if not (isinstance(n, int) and n >= 1):
        raise ValidationError("unit count must be an int >= 1")
    phys2 = replace(
        phys,
        r=phys.r / n,
        l=phys.l / n,
        r_f=phys.r_f / n,
        c_f=phys.c_f * n,
        c=phys.c * n,
        i_dc=None if phys.i_dc is None else phys.i_dc * n,
    )
    ctrl2 = replace(
        ctrl,
        k_p_i=ctrl.k_p_i * n,
        k_i_i=ctrl.k_i_i * n,
        k_p_dc=ctrl.k_p_dc * n,
        k_i_dc=ctrl.k_i_dc * n,
        k_p_2dc=ctrl.k_p_2dc * n,
        k_i_2dc=ctrl.k_i_2dc * n,
        k_pq=ctrl.k_pq * n,
        q_ref=ctrl.q_ref * n,
    )
    return phys2, ctrl2, float(n)


# ---------------------------------------------------------------------------
# scenario synthesis

@dataclass(frozen=True)
class SynthesisSpec:
    """Recipe for deterministic scenario families.

    ``curve`` is a cyclic demand profile (per-unit of nominal); scenario k
    places bus b at ``curve[(k + shift[b]) % len(curve)]`` times a uniform
    multiplicative noise term on [1-a, 1+a].  ``variants`` lists device
    availability maps; the scenario family is the cross product of variants
    and curve samples.  Draws come from a counter-based generator keyed on
    (seed, variant, sample, bus, channel), so results do not depend on
    iteration order or worker count.
    """

    curve: tuple
    shifts: dict = field(default_factory=dict)
    noise_amp: float = 0.03
    seed: int = 0
    variants: tuple = ({},)


def _ctr_uniform(seed: int, *counters: int) -> float:
    """One U[0,1) draw from a Philox stream at an explicit counter."""
    bits = np.random.Philox(key=np.uint64(seed),
                            counter=list(counters) + [0] * (4 - len(counters)))
    return float(np.random.Generator(bits).random())


def synthesize_scenarios(net: NetworkModel, spec: SynthesisSpec,
                         dispatch_rule=None) -> ScenarioSet:
    """Build a deterministic :class:`ScenarioSet` from a demand curve.

    ``dispatch_rule(net, load_mult, shunt_mult, available) -> Scenario``
    may replace the default proportional-share rule.
    """
    if not spec.curve:
        raise ValidationError("synthesis curve is empty")
    if not 0.0 <= spec.noise_amp < 1.0:
        raise ValidationError("noise_amp must lie in [0, 1)")
    rule = dispatch_rule or _dispatch_proportional
    period = len(spec.curve)
    bus_ids = [b.id for b in net.buses]
    scenarios = []
    for vi, variant in enumerate(spec.variants):
        for k in range(period):
            load_mult = {}
            shunt_mult = {}
            for bi, bus in enumerate(bus_ids):
                base = spec.curve[(k + spec.shifts.get(bus, 0)) % period]
                u_l = _ctr_uniform(spec.seed, vi, k, bi * 2)
                u_s = _ctr_uniform(spec.seed, vi, k, bi * 2 + 1)
                load_mult[bus] = base * (1.0 + spec.noise_amp * (2.0 * u_l - 1.0))
                shunt_mult[bus] = base * (1.0 + spec.noise_amp * (2.0 * u_s - 1.0))
            available = {d.id: True for d in net.devices}
            available.update(variant)
            scenarios.append(rule(net, load_mult, shunt_mult, available))
    return ScenarioSet(scenarios=tuple(scenarios), seed=spec.seed)


def nominal_load_mw(net: NetworkModel, bus_id: str, mult: float = 1.0) -> float:
    """Active power drawn by the impedance loads at a bus at 1 pu voltage."""
    p = 0.0
    for br in net.branches:
        if br.kind == "rl_load" and br.terminals[0] == bus_id:
            r, x = br.params["r"], br.params["x"]
            p += r / (r * r + x * x) * mult
    return p * net.power_base_mva


def _dispatch_proportional(net, load_mult, shunt_mult, available) -> Scenario:
    """Share the scheduled demand among sources by nameplate rating.

    The slack device keeps its proportional share as a bookkeeping value;
    the power flow lets it absorb losses and load-model mismatch.
    """
    total_mw = sum(nominal_load_mw(net, b.id, load_mult.get(b.id, 1.0))
                   for b in net.buses)
    sources = [d for d in net.devices
               if d.kind in (SG, IBR) and available.get(d.id, True)]
    total_rating = sum(d.rating for d in sources)
    dispatch = {}
    for d in sources:
        share = d.rating / total_rating if total_rating > 0 else 0.0
        dispatch[d.id] = Dispatch(p_mw=share * total_mw,
                                  v_ref=net.bus(d.bus).v_ref)
    return Scenario(load_multipliers=dict(load_mult),
                    shunt_multipliers=dict(shunt_mult),
                    dispatch=dispatch,
                    available=dict(available))


# ---------------------------------------------------------------------------
# thevenin reduction

def thevenin_reduce(net: NetworkModel, keep_bus: str,
                    scenario: Scenario) -> NetworkModel:
    """Collapse everything except the device at ``keep_bus`` into one
    equivalent source behind an impedance.

    The impedance is the nominal-frequency driving-point impedance at
    ``keep_bus`` with machines replaced by their subtransient impedance
    behind a constant source and converter units left open-circuit.  The
    source magnitude is the power-flow voltage at ``keep_bus`` with the
    kept device's injection removed.

    The result is the explicit two-bus form: an ideal source on a new
    slack bus, a series branch carrying the equivalent impedance, and the
    kept device on ``keep_bus``.
    """
    from . import powerflow  # local import; powerflow depends on this module

    kept = [d for d in net.devices
            if d.bus == keep_bus and scenario.is_available(d.id)]
    if len(kept) != 1:
        raise ValidationError(
            f"thevenin_reduce needs exactly one available device at {keep_bus}")
    kept_dev = kept[0]
    slack_ids = [b.id for b in net.buses if b.role == "slack"]
    if kept_dev.bus in slack_ids:
        raise ValidationError("cannot reduce around the slack device")

    # Open-circuit voltage: solve with the kept device absent.
    sc_open = Scenario(
        load_multipliers=dict(scenario.load_multipliers),
        shunt_multipliers=dict(scenario.shunt_multipliers),
        dispatch={k: v for k, v in scenario.dispatch.items()
                  if k != kept_dev.id},
        available={**scenario.available, kept_dev.id: False},
    )
    keep_role_pq = replace(net, buses=tuple(
        replace(b, role="pq") if b.id == keep_bus and b.role == "pv" else b
        for b in net.buses))
    sol = powerflow.solve_power_flow(keep_role_pq, sc_open)
    v_oc = abs(sol.voltage[keep_bus])

    z = driving_point_impedance(net, keep_bus, scenario,
                                exclude_devices=(kept_dev.id,))
    src_bus = f"thev_{keep_bus}__src"
    host = net.bus(keep_bus)
    reduced = NetworkModel(
        frequency_hz=net.frequency_hz,
        power_base_mva=net.power_base_mva,
        buses=(
            Bus(id=src_bus, role="slack", base_voltage=host.base_voltage,
                v_ref=v_oc),
            host,
        ),
        branches=(
            Branch(id=f"thev_{keep_bus}__z", kind="pi_line",
                   terminals=(src_bus, keep_bus),
                   params={"r": z.real, "x": z.imag, "b_total": 0.0}),
        ),
        devices=(
            Device(id=f"thev_{keep_bus}", bus=src_bus, kind=THEVENIN,
                   rating=net.power_base_mva,
                   thevenin=TheveninParams(r=0.0, x=0.0, v=v_oc)),
            kept_dev,
        ),
    )
    return reduced


def driving_point_impedance(net: NetworkModel, at_bus: str, scenario: Scenario,
                            exclude_devices: tuple = ()) -> complex:
    """Nominal-frequency impedance looking into ``at_bus``.

    Machines contribute a shunt 1/(r_s + j x_d_st) on the system base;
    converter units are open; ideal (zero-impedance) sources ground their
    bus.  Loads and shunts carry the scenario multipliers.
    """
    from . import powerflow

    ybus, grounded = powerflow.quasi_static_admittance(
        net, scenario, exclude_devices=exclude_devices)
    order = [b.id for b in net.buses if b.id not in grounded]
    if at_bus not in order:
        raise ValidationError(f"bus {at_bus} is grounded by an ideal source")
    idx = {b: i for i, b in enumerate(order)}
    z = np.linalg.inv(ybus)
    return complex(z[idx[at_bus], idx[at_bus]])


# ---------------------------------------------------------------------------
# JSON serialization

def network_to_dict(net: NetworkModel) -> dict:
    return {
        "frequency_hz": net.frequency_hz,
        "power_base_mva": net.power_base_mva,
        "buses": [
            {"id": b.id, "role": b.role, "base_voltage": b.base_voltage,
             "v_ref": b.v_ref}
            for b in net.buses
        ],
        "branches": [
            {"id": br.id, "kind": br.kind, "terminals": list(br.terminals),
             "params": dict(br.params)}
            for br in net.branches
        ],
        "devices": [_device_to_dict(d) for d in net.devices],
    }


def _device_to_dict(d: Device) -> dict:
    out = {"id": d.id, "bus": d.bus, "kind": d.kind, "rating": d.rating}
    if d.sg is not None:
        sg = d.sg
        out["sg"] = {
            k: getattr(sg, k)
            for k in ("x_d", "x_q", "x_d_t", "x_q_t", "x_d_st", "x_q_st",
                      "x_l", "r_s", "t_d0_t", "t_q0_t", "t_d0_st", "t_q0_st",
                      "h", "d_damp")
        }
        out["sg"]["governor"] = {k: getattr(sg.governor, k) for k in
                                 ("r_droop", "t_sv", "t_ch", "t_rh", "f_hp")}
        out["sg"]["avr"] = {k: getattr(sg.avr, k) for k in
                            ("k_a", "t_a", "k_e", "t_e", "k_f", "t_f", "t_r")}
    if d.ibr is not None:
        phys, ctrl, n = d.ibr
        out["ibr"] = {
            "physical": {k: getattr(phys, k) for k in
                         ("r", "l", "c_f", "r_f", "c", "s_base",
                          "v_base_ac", "v_base_dc", "i_dc")},
            "control": {k: getattr(ctrl, k) for k in
                        ("k_p_pll", "k_i_pll", "k_p_i", "k_i_i", "k_p_dc",
                         "k_i_dc", "k_p_2dc", "k_i_2dc", "dc_variant",
                         "droop_p", "droop_q", "k_pq", "q_ref", "v_dc_ref",
                         "v_d_ref", "omega_ref")},
            "n_units": n,
        }
    if d.thevenin is not None:
        out["thevenin"] = {"r": d.thevenin.r, "x": d.thevenin.x,
                           "v": d.thevenin.v}
    return out


def network_from_dict(data: dict) -> NetworkModel:
    try:
        buses = tuple(Bus(id=b["id"], role=b["role"],
                          base_voltage=b["base_voltage"],
                          v_ref=b.get("v_ref", 1.0))
                      for b in data["buses"])
        branches = tuple(Branch(id=br["id"], kind=br["kind"],
                                terminals=tuple(br["terminals"]),
                                params=dict(br["params"]))
                         for br in data["branches"])
        devices = tuple(_device_from_dict(d) for d in data["devices"])
        net = NetworkModel(frequency_hz=data["frequency_hz"],
                           power_base_mva=data["power_base_mva"],
                           buses=buses, branches=branches, devices=devices)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed network data: {exc!r}") from exc
    validate_network(net)
    return net


def _device_from_dict(d: dict) -> Device:
    sg = ibr = thev = None
    if "sg" in d:
        raw = dict(d["sg"])
        gov = GovernorParams(**raw.pop("governor", {}))
        avr = AvrParams(**raw.pop("avr", {}))
        sg = SgParams(governor=gov, avr=avr, **raw)
    if "ibr" in d:
        phys = IbrPhysicalParams(**d["ibr"]["physical"])
        ctrl = IbrControlParams(**d["ibr"]["control"])
        ibr = (phys, ctrl, int(d["ibr"]["n_units"]))
    if "thevenin" in d:
        thev = TheveninParams(**d["thevenin"])
    return Device(id=d["id"], bus=d["bus"], kind=d["kind"],
                  rating=d["rating"], sg=sg, ibr=ibr, thevenin=thev)


def scenarios_to_dict(sset: ScenarioSet) -> dict:
    return {
        "seed": sset.seed,
        "scenarios": [
            {
                "load_multipliers": dict(s.load_multipliers),
                "shunt_multipliers": dict(s.shunt_multipliers),
                "dispatch": {k: {"p_mw": v.p_mw, "v_ref": v.v_ref}
                             for k, v in s.dispatch.items()},
                "available": dict(s.available),
            }
            for s in sset.scenarios
        ],
    }


def scenarios_from_dict(data: dict) -> ScenarioSet:
    try:
        scenarios = tuple(
            Scenario(
                load_multipliers=dict(s["load_multipliers"]),
                shunt_multipliers=dict(s.get("shunt_multipliers", {})),
                dispatch={k: Dispatch(p_mw=v["p_mw"], v_ref=v["v_ref"])
                          for k, v in s["dispatch"].items()},
                available=dict(s.get("available", {})),
            )
            for s in data["scenarios"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed scenario data: {exc!r}") from exc
    return ScenarioSet(scenarios=scenarios, seed=data.get("seed"))


def load_network(path) -> NetworkModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(
                f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}"
            ) from exc
    return network_from_dict(data)


def save_network(net: NetworkModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh, indent=1)
        fh.write("\n")


def load_scenarios(path) -> ScenarioSet:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(
                f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}"
            ) from exc
    return scenarios_from_dict(data)


def save_scenarios(sset: ScenarioSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenarios_to_dict(sset), fh, indent=1)
        fh.write("\n")
