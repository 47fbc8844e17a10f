"""Command-line workflows: power flow, eigenvalue dumps, stability
screens, boundary mapping, gain tuning, figure rendering, and the
case-study matrix over the bundled example network.

All numeric CSV cells are printed with 17 significant digits so files
round-trip; timestamps appear only in manifest.json.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import netmodel as nm
from .asm import AsmConfig, ManifoldModel, ParameterDomain, export_manifold, run_asm
from .csvio import write_csv
from .errors import InfeasibleError, NumericalError, ValidationError
from .powerflow import expand_sources, solve_power_flow
from .stability import TUNABLE_FIELDS, CaseContext, is_ps_stable
from .tuner import PlantData, TunerProblem, bw_pm, rpi_ok, tune

__all__ = ["CaseStudy", "RunManifest", "main", "run_case_matrix"]

# Replacement converter unit for SG-to-IBR case studies.  Illustrative
# placeholder constants for a 5 MVA low-voltage unit; not benchmark data.
REPLACEMENT_UNIT_MVA = 5.0


def default_unit() -> tuple:
    phys = nm.IbrPhysicalParams(r=0.05, l=0.15, c_f=0.05, r_f=0.0016,
                                c=0.015, s_base=5e6, v_base_ac=690.0,
                                v_base_dc=1500.0)
    ctrl = nm.IbrControlParams(k_p_pll=62.8, k_i_pll=785.0, k_p_i=0.9,
                               k_i_i=170.0, k_p_dc=1.27, k_i_dc=48.0)
    return phys, ctrl


# Default tuning box; brackets the placeholder unit's gains.
DEFAULT_TUNE_DOMAIN = ParameterDomain(
    names=("k_p_pll", "k_i_pll", "k_p_i", "k_i_i", "k_p_dc", "k_i_dc"),
    bounds=((5.0, 150.0), (50.0, 2000.0), (0.3, 3.0), (20.0, 600.0),
            (0.3, 5.0), (5.0, 200.0)))

GRID_RESOLUTION = 41


# ---------------------------------------------------------------------------
# manifest

@dataclass(frozen=True)
class RunManifest:
    """Provenance record for one CLI run; the only artifact carrying
    wall-clock timestamps."""
    inputs: dict      # file name -> sha256
    outputs: dict     # file name -> sha256
    seeds: dict
    version: str
    created: str      # ISO 8601, UTC

    def to_dict(self) -> dict:
        return {"kind": "run_manifest", "inputs": dict(self.inputs),
                "outputs": dict(self.outputs), "seeds": dict(self.seeds),
                "version": self.version, "created": self.created}

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        if d.get("kind") != "run_manifest":
            raise ValidationError("not a run manifest document")
        return cls(inputs=dict(d["inputs"]), outputs=dict(d["outputs"]),
                   seeds=dict(d["seeds"]), version=d["version"],
                   created=d["created"])


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, inputs, outputs, seeds) -> Path:
    man = RunManifest(
        inputs={Path(p).name: file_digest(p) for p in inputs},
        outputs={Path(p).name: file_digest(p) for p in outputs},
        seeds=dict(seeds), version=__version__,
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(man.to_dict(), indent=1) + "\n",
                    encoding="utf-8")
    return path


def check_manifest(path, base_dir=None) -> bool:
    """Recompute the digests a manifest stores; True iff all match.

    Outputs must verify against the manifest's own directory (or
    ``base_dir``).  Inputs are recorded by file name and usually live
    elsewhere, so they are checked only when a file of that name is
    present.
    """
    base = Path(base_dir) if base_dir is not None else Path(path).parent
    man = RunManifest.from_dict(_load_json(path))
    for name, digest in man.outputs.items():
        p = base / name
        if not p.exists() or file_digest(p) != digest:
            return False
    for name, digest in man.inputs.items():
        p = base / name
        if p.exists() and file_digest(p) != digest:
            return False
    return True


# ---------------------------------------------------------------------------
# shared helpers

def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}"
        ) from exc


def _scenario_set(net, path):
    if path is None:
        return nm.ScenarioSet(scenarios=(nm.nominal_scenario(net),))
    return nm.load_scenarios(path)


def _parse_params(text) -> dict:
    """"k=v,k2=v2" -> dict of gain overrides."""
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise ValidationError(f"bad --params entry {item!r}; use k=v")
        k, v = item.split("=", 1)
        k = k.strip()
        if k not in TUNABLE_FIELDS:
            raise ValidationError(f"unknown gain field {k!r}")
        out[k] = float(v)
    return out


def _parse_pair(text) -> tuple:
    names = tuple(s.strip() for s in text.split(","))
    if len(names) != 2 or len(set(names)) != 2:
        raise ValidationError("--pair needs two distinct gain names")
    unknown = set(names) - TUNABLE_FIELDS
    if unknown:
        raise ValidationError(f"unknown gain fields {sorted(unknown)}")
    return names


def _parse_domain(text) -> tuple:
    vals = [float(s) for s in text.split(",")]
    if len(vals) != 4:
        raise ValidationError("--domain needs lo1,hi1,lo2,hi2")
    return ((vals[0], vals[1]), (vals[2], vals[3]))


def _with_gains(net, dev_ids, gains):
    """Copy of net with gain fields replaced on the given converters."""
    if not gains:
        return net
    devs = []
    for d in net.devices:
        if d.id in dev_ids:
            if d.kind != nm.IBR:
                raise ValidationError(f"device {d.id} is not a converter")
            phys, ctrl, n = d.ibr
            d = replace(d, ibr=(phys, replace(ctrl, **gains), n))
        devs.append(d)
    return replace(net, devices=tuple(devs))


def replace_with_ibr(net, dev_ids, gains=None):
    """SG devices swapped for aggregated converter units of the same MVA
    rating (one 5 MVA unit per 5 MVA of rating); their buses become PQ."""
    phys, ctrl = default_unit()
    if gains:
        ctrl = replace(ctrl, **gains)
    ids = set(dev_ids)
    demote = set()
    devs = []
    for d in net.devices:
        if d.id not in ids:
            devs.append(d)
            continue
        if d.kind == nm.IBR:
            devs.append(d)   # already a converter; gains applied below
            continue
        if d.kind != nm.SG:
            raise ValidationError(f"device {d.id} is not a machine")
        if net.bus(d.bus).role == "slack":
            raise ValidationError(
                f"cannot replace {d.id}: it holds the slack bus")
        n_f = d.rating / REPLACEMENT_UNIT_MVA
        n = int(round(n_f))
        if n < 1 or abs(n - n_f) > 1e-9:
            raise ValidationError(
                f"device {d.id}: rating {d.rating} MVA is not a multiple "
                f"of the {REPLACEMENT_UNIT_MVA} MVA replacement unit")
        devs.append(nm.Device(id=d.id, bus=d.bus, kind=nm.IBR,
                              rating=d.rating, ibr=(phys, ctrl, n)))
        demote.add(d.bus)
    buses = tuple(replace(b, role="pq") if b.id in demote and b.role == "pv"
                  else b for b in net.buses)
    out = replace(net, buses=buses, devices=tuple(devs))
    if gains:
        out = _with_gains(out, [i for i in ids
                                if out.device(i).kind == nm.IBR], gains)
    return out


def plant_for_device(net, scenario, dev_id) -> PlantData:
    """Operating-point loop-model constants for one converter."""
    dev = net.device(dev_id)
    if dev.kind != nm.IBR:
        raise ValidationError(f"device {dev_id} is not a converter")
    phys, ctrl, _ = dev.ibr
    sol = solve_power_flow(expand_sources(net), scenario)
    v_d0 = float(abs(sol.voltage[dev.bus]))
    return PlantData.from_unit(phys, net.omega_nom, v_d0=v_d0,
                               v_dc0=ctrl.v_dc_ref)


def _out_dir(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------------------
# subcommands

def cmd_powerflow(args) -> int:
    net = nm.load_network(args.net)
    sset = _scenario_set(net, args.scenarios)
    if not 0 <= args.scenario < len(sset.scenarios):
        raise ValidationError(f"scenario index {args.scenario} out of range")
    scen = sset.scenarios[args.scenario]
    net_x = expand_sources(net)
    sol = solve_power_flow(net_x, scen)
    volt = sol.voltage
    rows = []
    for b in net.buses:
        v = volt[b.id]
        rows.append((b.id, abs(v), float(np.angle(v)), "", ""))
    solved_bus = {d.id: d.bus for d in net_x.devices}
    occupancy: dict = {}
    for d in net_x.devices:
        occupancy[d.bus] = occupancy.get(d.bus, 0) + 1
    for d in net.devices:
        bus = solved_bus[d.id]
        if occupancy[bus] != 1:
            raise ValidationError(
                f"bus {bus} hosts several devices; per-device powers "
                f"are only defined for exclusive buses")
        if not scen.is_available(d.id):
            rows.append((d.id, "", "", 0.0, 0.0))
            continue
        s = sol.injection_power(bus)
        rows.append((d.id, "", "", s.real, s.imag))
    out = _out_dir(args) / "powerflow.csv"
    write_csv(out, ("id", "vm_pu", "va_rad", "p_pu", "q_pu"), rows)
    print(out)
    return 0


def _focus_list(text) -> tuple:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def cmd_eigs(args) -> int:
    net = nm.load_network(args.net)
    sset = _scenario_set(net, args.scenarios)
    if not 0 <= args.scenario < len(sset.scenarios):
        raise ValidationError(f"scenario index {args.scenario} out of range")
    rho = _parse_params(args.params)
    focus = _focus_list(args.focus) if args.focus else ()
    if focus:
        net = replace_with_ibr(net, focus)
    ctx = CaseContext(net, sset.scenarios, focus=focus)
    asys = ctx.assembled(args.scenario, rho or None)
    out_dir = _out_dir(args)
    a_path = out_dir / "eigs_a.csv"
    write_csv(a_path, asys.state_labels, [tuple(row) for row in asys.a])
    vals, vecs = np.linalg.eig(asys.a)
    order = np.lexsort((-vals.imag, -vals.real))
    rows = []
    for k in order:
        dom = asys.state_labels[int(np.argmax(np.abs(vecs[:, k])))]
        rows.append((vals[k].real, vals[k].imag, dom))
    s_path = out_dir / "eigs_spectrum.csv"
    write_csv(s_path, ("re", "im", "dominant_state"), rows)
    print(a_path)
    print(s_path)
    return 0


def cmd_stability(args) -> int:
    net = nm.load_network(args.net)
    sset = _scenario_set(net, args.scenarios)
    rho = _parse_params(args.params)
    focus = _focus_list(args.focus) if args.focus else ()
    if focus:
        net = replace_with_ibr(net, focus)
    ctx = CaseContext(net, sset.scenarios, focus=focus)
    verdict = is_ps_stable(rho or None, ctx, threads=args.threads)
    header = ("scenario", "alpha_max", "stable")
    rows = [(k, a, int(np.isfinite(a) and a < 0.0))
            for k, a in enumerate(verdict.abscissae)]
    out = _out_dir(args) / "stability.csv"
    write_csv(out, header, rows)
    print(",".join(header))
    for r in rows:
        print(f"{r[0]},{r[1]:.17g},{r[2]}")
    print(f"verdict,{verdict.s}")
    return 0


def _asm_outputs(prefix: Path, manifold, domain, plant, base_ctrl, markers):
    """Write the four boundary-mapping artifacts for one ASM run."""
    names = domain.names
    samp_path = Path(f"{prefix}_samples.csv")
    rows = [tuple(s) + (int(lab),)
            for s, lab in zip(manifold.samples, manifold.labels)]
    write_csv(samp_path, names + ("label",), rows)

    def in_rpi(point):
        ctrl = replace(base_ctrl,
                       **dict(zip(names, (float(v) for v in point))))
        return rpi_ok(bw_pm(ctrl, plant), plant.omega_nom)

    grid_path = Path(f"{prefix}_grid.csv")
    svg_path = Path(f"{prefix}_plot.svg")
    export_manifold(manifold, GRID_RESOLUTION, rpi_mask=in_rpi,
                    csv_path=grid_path, svg_path=svg_path, markers=markers)
    model_path = Path(f"{prefix}_model.json")
    model_path.write_text(json.dumps(manifold.to_dict(), indent=1) + "\n",
                          encoding="utf-8")
    return [samp_path, grid_path, model_path, svg_path]


def _run_asm_workflow(net, sset, focus, pair, bounds, fixed, cfg, threads,
                      prefix, marker_point=None):
    net = _with_gains(net, focus, fixed)   # fixed gains live in the net
    ctx = CaseContext(net, sset.scenarios, focus=focus)
    domain = ParameterDomain(names=pair, bounds=bounds)

    def oracle(point):
        rho = dict(zip(pair, (float(v) for v in point)))
        return is_ps_stable(rho, ctx, threads=1).s

    manifold = run_asm(oracle, domain, cfg, threads=threads)
    plant = plant_for_device(net, sset.scenarios[0], focus[0])
    base_ctrl = net.device(focus[0]).ibr[1]
    markers = []
    if marker_point is not None:
        markers.append((marker_point[0], marker_point[1], "star", "#1f4fd8"))
    return manifold, _asm_outputs(prefix, manifold, domain, plant,
                                  base_ctrl, markers)


def cmd_asm(args) -> int:
    net = nm.load_network(args.net)
    sset = _scenario_set(net, args.scenarios)
    focus = _focus_list(args.focus)
    if not focus:
        raise ValidationError("--focus must name at least one converter")
    net = replace_with_ibr(net, focus)   # machines in focus become plants
    pair = _parse_pair(args.pair)
    bounds = _parse_domain(args.domain)
    fixed = {}
    tuned_marker = None
    if args.tuned:
        doc = _load_json(args.tuned)
        if doc.get("kind") != "tuner_result":
            raise ValidationError(f"{args.tuned} is not a tuning result")
        fixed.update({k: float(v) for k, v in doc["rho"].items()})
        if all(p in doc["rho"] for p in pair):
            tuned_marker = tuple(float(doc["rho"][p]) for p in pair)
    fixed.update(_parse_params(args.params))
    for p in pair:
        fixed.pop(p, None)
    cfg = AsmConfig(n_init=args.ninit, n_r=args.nr, n_a=args.na,
                    p_th=args.pth, seed=args.seed)
    out_dir = _out_dir(args)
    prefix = out_dir / args.out
    _, outputs = _run_asm_workflow(net, sset, focus, pair, bounds, fixed,
                                   cfg, args.threads, prefix,
                                   marker_point=tuned_marker)
    inputs = [args.net] + ([args.scenarios] if args.scenarios else []) \
        + ([args.tuned] if args.tuned else [])
    write_manifest(out_dir, inputs, outputs, {"seed": args.seed})
    for p in outputs:
        print(p)
    return 0


def _parse_connections(text) -> list:
    combos = []
    for part in text.split(";"):
        ids = tuple(s.strip() for s in part.split(",") if s.strip())
        if ids:
            combos.append(ids)
    if not combos:
        raise ValidationError("--connections is empty")
    return combos


def cmd_tune(args) -> int:
    net = nm.load_network(args.net)
    sset = _scenario_set(net, args.scenarios)
    combos = _parse_connections(args.connections)
    contexts = []
    for ids in combos:
        variant = replace_with_ibr(net, ids)
        contexts.append(CaseContext(variant, sset.scenarios, focus=ids,
                                    name=",".join(ids)))
    first = contexts[0].net
    plant = plant_for_device(first, sset.scenarios[0], combos[0][0])
    ctrl_base = first.device(combos[0][0]).ibr[1]
    problem = TunerProblem(contexts=tuple(contexts),
                           domain=DEFAULT_TUNE_DOMAIN, plant=plant,
                           ctrl_base=ctrl_base, eps=args.eps,
                           budget=args.budget, seed=args.seed,
                           threads=args.threads)
    result = tune(problem)
    out_dir = _out_dir(args)
    out = out_dir / args.out
    doc = result.to_dict()
    doc["connections"] = [list(c) for c in combos]
    doc["domain"] = {"names": list(DEFAULT_TUNE_DOMAIN.names),
                     "bounds": [list(b) for b in DEFAULT_TUNE_DOMAIN.bounds]}
    out.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    inputs = [args.net] + ([args.scenarios] if args.scenarios else [])
    write_manifest(out_dir, inputs, [out], {"seed": args.seed})
    print(out)
    if not result.feasible:
        raise InfeasibleError(
            f"no feasible gain point within budget {args.budget}; "
            f"best violation recorded in {out}")
    return 0


def _read_grid_csv(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    header = lines[0].split(",")
    if len(header) < 4 or header[-2:] != ["probability", "in_rpi"]:
        raise ValidationError(f"{path} is not a manifold grid file")
    names = header[:-2]
    body = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    if body.shape[1] != len(header):
        raise ValidationError(f"{path}: ragged rows")
    return names, body


def cmd_report(args) -> int:
    from .svgplot import heatmap_svg, write_svg

    model_doc = _load_json(args.model)
    model = ManifoldModel.from_dict(model_doc)
    names, body = _read_grid_csv(args.grid)
    if len(names) != 2:
        raise ValidationError("report rendering needs a 2-D grid")
    ax0 = np.unique(body[:, 0])
    ax1 = np.unique(body[:, 1])
    if len(ax0) * len(ax1) != len(body):
        raise ValidationError(f"{args.grid}: grid is not a full cartesian "
                              f"product of its axes")
    probs = body[:, -2].reshape(len(ax0), len(ax1))
    rpi = body[:, -1].reshape(len(ax0), len(ax1)) > 0.5
    markers = []
    if args.tuned:
        doc = _load_json(args.tuned)
        rho = doc.get("rho", {})
        if all(n in rho for n in names):
            markers.append((float(rho[names[0]]), float(rho[names[1]]),
                            "star", "#1f4fd8"))
    svg = heatmap_svg(ax0, ax1, probs, contour_level=model.config.p_th,
                      mask=rpi, markers=markers, xlabel=names[0],
                      ylabel=names[1], title="stability manifold")
    out_dir = _out_dir(args)
    svg_path = out_dir / f"{args.out}.svg"
    write_svg(svg_path, svg)
    csv_path = out_dir / f"{args.out}.csv"
    write_csv(csv_path,
              ("points", "p_th", "frac_stable", "frac_in_rpi"),
              [(len(body), model.config.p_th,
                float(np.mean(probs >= model.config.p_th)),
                float(np.mean(rpi)))])
    print(svg_path)
    print(csv_path)
    return 0


# ---------------------------------------------------------------------------
# case-study matrix

@dataclass(frozen=True)
class CaseStudy:
    """One row of the study matrix: which generators are machines, which
    are converter plants, and whose gains the boundary map varies."""
    name: str
    assignment: dict   # device id -> "SG" | "IBR"
    focus: tuple

    def __post_init__(self):
        if not self.name:
            raise ValidationError("case study needs a name")
        if not self.focus:
            raise ValidationError(f"case {self.name}: empty focus set")
        for f in self.focus:
            if self.assignment.get(f) != "IBR":
                raise ValidationError(
                    f"case {self.name}: focus device {f} is not assigned IBR")
        for dev, kind in self.assignment.items():
            if kind not in ("SG", "IBR"):
                raise ValidationError(
                    f"case {self.name}: bad assignment {dev}={kind}")


def load_cases(path) -> list:
    doc = _load_json(path)
    cases = [CaseStudy(name=c["name"], assignment=dict(c["assignment"]),
                       focus=tuple(c["focus"])) for c in doc["cases"]]
    if len({c.name for c in cases}) != len(cases):
        raise ValidationError("case names must be unique")
    return cases


def _case_variant(net, case, gains):
    for dev_id in case.assignment:
        try:
            net.device(dev_id)
        except KeyError:
            raise ValidationError(
                f"case {case.name}: unknown device {dev_id}") from None
    to_ibr = [d for d, kind in case.assignment.items() if kind == "IBR"]
    for dev_id, kind in case.assignment.items():
        if kind == "SG" and net.device(dev_id).kind != nm.SG:
            raise ValidationError(
                f"case {case.name}: {dev_id} cannot be assigned back to SG")
    return replace_with_ibr(net, to_ibr, gains)


def run_case_matrix(net, sset, cases, pair, bounds, cfg, gains,
                    out_root: Path, threads: int = 1) -> dict:
    """Boundary map per case study; per-case outputs under out_root/name.

    Case k runs with seed cfg.seed + k so the runs are independent and
    the schedule (thread count) cannot change any output byte.
    """
    def one(k_case):
        k, case = k_case
        variant = _case_variant(net, case, gains)
        case_dir = out_root / case.name
        case_dir.mkdir(parents=True, exist_ok=True)
        case_cfg = replace(cfg, seed=cfg.seed + k)
        marker = None
        if gains and all(p in gains for p in pair):
            marker = tuple(float(gains[p]) for p in pair)
        fixed = {k2: v for k2, v in (gains or {}).items() if k2 not in pair}
        manifold, outputs = _run_asm_workflow(
            variant, sset, case.focus, pair, bounds, fixed, case_cfg,
            threads=1, prefix=case_dir / case.name, marker_point=marker)
        return case.name, (manifold, outputs, case_dir)

    items = list(enumerate(cases))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(one, items))
    else:
        results = dict(map(one, items))
    return results


def cmd_case_matrix(args) -> int:
    net = nm.load_network(args.net)
    sset = _scenario_set(net, args.scenarios)
    cases = load_cases(args.cases)
    tuned_path = Path(args.tuned)
    if not tuned_path.exists():
        raise ValidationError(
            f"no tuned gains at {tuned_path}; run `stabman tune` first")
    doc = _load_json(tuned_path)
    if doc.get("kind") != "tuner_result":
        raise ValidationError(f"{tuned_path} is not a tuning result")
    gains = {k: float(v) for k, v in doc["rho"].items()}
    pair = _parse_pair(args.pair)
    bounds = _parse_domain(args.domain)
    cfg = AsmConfig(n_init=args.ninit, n_r=args.nr, n_a=args.na,
                    p_th=args.pth, seed=args.seed)
    out_root = _out_dir(args)
    results = run_case_matrix(net, sset, cases, pair, bounds, cfg, gains,
                              out_root, threads=args.threads)
    inputs = [args.net, args.cases, args.tuned] \
        + ([args.scenarios] if args.scenarios else [])
    for k, case in enumerate(cases):
        _, outputs, case_dir = results[case.name]
        write_manifest(case_dir, inputs, outputs,
                       {"seed": args.seed, "case_seed": args.seed + k})
        for p in outputs:
            print(p)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stabman",
        description="Small-signal stability manifolds and gain tuning.")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=".")
    sub = p.add_subparsers(dest="command", required=True)

    pf = sub.add_parser("powerflow", help="solve one operating point")
    pf.add_argument("--net", required=True)
    pf.add_argument("--scenarios")
    pf.add_argument("--scenario", type=int, default=0)
    pf.set_defaults(func=cmd_powerflow)

    eg = sub.add_parser("eigs", help="dump the state matrix and spectrum")
    eg.add_argument("--net", required=True)
    eg.add_argument("--scenarios")
    eg.add_argument("--scenario", type=int, default=0)
    eg.add_argument("--params", default="")
    eg.add_argument("--focus", default="")
    eg.set_defaults(func=cmd_eigs)

    st = sub.add_parser("stability", help="scenario-wise stability screen")
    st.add_argument("--net", required=True)
    st.add_argument("--scenarios")
    st.add_argument("--params", default="")
    st.add_argument("--focus", default="")
    st.set_defaults(func=cmd_stability)

    am = sub.add_parser("asm", help="map a stability boundary over a "
                                    "gain pair")
    am.add_argument("--net", required=True)
    am.add_argument("--scenarios")
    am.add_argument("--focus", required=True)
    am.add_argument("--pair", required=True,
                    help="varied gain pair, e.g. k_p_pll,k_i_pll")
    am.add_argument("--domain", required=True, help="lo1,hi1,lo2,hi2")
    am.add_argument("--ninit", type=int, default=100)
    am.add_argument("--na", type=int, default=250)
    am.add_argument("--nr", type=int, default=20000)
    am.add_argument("--pth", type=float, default=0.8)
    am.add_argument("--params", default="",
                    help="remaining gains fixed at these values")
    am.add_argument("--tuned", help="tuning result supplying fixed gains")
    am.add_argument("--out", default="asm", help="output file prefix")
    am.set_defaults(func=cmd_asm)

    tn = sub.add_parser("tune", help="constrained gain tuning")
    tn.add_argument("--net", required=True)
    tn.add_argument("--scenarios")
    tn.add_argument("--connections", required=True,
                    help='replacement combinations, e.g. "G10;G10,G11"')
    tn.add_argument("--budget", type=int, default=120)
    tn.add_argument("--eps", type=float, default=1e-3)
    tn.add_argument("--out", default="tuned.json")
    tn.set_defaults(func=cmd_tune)

    rp = sub.add_parser("report", help="render a saved boundary map")
    rp.add_argument("--model", required=True)
    rp.add_argument("--grid", required=True)
    rp.add_argument("--tuned")
    rp.add_argument("--out", default="report")
    rp.set_defaults(func=cmd_report)

    cm = sub.add_parser("case-matrix", help="boundary maps for a matrix "
                                            "of device assignments")
    cm.add_argument("--net", required=True)
    cm.add_argument("--scenarios")
    cm.add_argument("--cases", required=True)
    cm.add_argument("--tuned", required=True)
    cm.add_argument("--pair", required=True)
    cm.add_argument("--domain", required=True)
    cm.add_argument("--ninit", type=int, default=100)
    cm.add_argument("--na", type=int, default=250)
    cm.add_argument("--nr", type=int, default=20000)
    cm.add_argument("--pth", type=float, default=0.8)
    cm.set_defaults(func=cmd_case_matrix)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
