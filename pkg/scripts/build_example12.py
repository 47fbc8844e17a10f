"""Regenerate the bundled 12-bus example network and its scenario set.

A 220 kV six-bus ring with a 380 kV double-transformer overlay and four
generation buses behind step-up transformers.  Loads are impedance loads
sized at nominal voltage; two ring buses carry shunt capacitors.  All
parameters are illustrative round numbers, not measurements of any real
grid.  Run with --save to rewrite src/stabman/data/.
"""

import argparse
from pathlib import Path

import stabman.netmodel as nm
from stabman.assembler import assemble, equilibrium_residual
from stabman.cli import replace_with_ibr
from stabman.powerflow import expand_sources, solve_power_flow
from stabman.stability import angle_state_mask, eigenvalues

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "stabman" / "data"


def load_z(p_mw, q_mvar, s_base=100.0):
    s = complex(p_mw, q_mvar) / s_base
    z = 1.0 / s.conjugate()
    return {"r": z.real, "x": z.imag}


def xfmr(x_total, r_over_x=0.05):
    # magnetizing branch at 150 / 30 pu on the unit rating, converted to
    # the system base through the same ratio as the 12 % series impedance
    x1 = x_total / 2.0
    r1 = r_over_x * x1
    return {"r1": r1, "x1": x1, "r2": r1, "x2": x1,
            "r_m": 1250.0 * x_total, "x_m": 250.0 * x_total}


SG = nm.SgParams(
    x_d=1.8, x_q=1.7, x_d_t=0.3, x_q_t=0.55, x_d_st=0.25,
    x_q_st=0.25, x_l=0.2, r_s=0.003,
    t_d0_t=8.0, t_q0_t=0.4, t_d0_st=0.03, t_q0_st=0.05,
    h=6.5, d_damp=0.0,
    governor=nm.GovernorParams(), avr=nm.AvrParams())


def build_network() -> nm.NetworkModel:
    buses = (
        nm.Bus("b1", "pq", 220.0), nm.Bus("b2", "pq", 220.0),
        nm.Bus("b3", "pq", 220.0), nm.Bus("b4", "pq", 220.0),
        nm.Bus("b5", "pq", 220.0), nm.Bus("b6", "pq", 220.0),
        nm.Bus("b7", "pq", 380.0), nm.Bus("b8", "pq", 380.0),
        nm.Bus("b9", "slack", 22.0, v_ref=1.03),
        nm.Bus("b10", "pv", 22.0, v_ref=1.03),
        nm.Bus("b11", "pv", 22.0, v_ref=1.03),
        nm.Bus("b12", "pv", 22.0, v_ref=1.03),
    )
    branches = (
        nm.Branch("L12", "pi_line", ("b1", "b2"),
                  {"r": 0.010, "x": 0.085, "b_total": 0.018}),
        nm.Branch("L23", "pi_line", ("b2", "b3"),
                  {"r": 0.011, "x": 0.092, "b_total": 0.020}),
        nm.Branch("L34", "pi_line", ("b3", "b4"),
                  {"r": 0.012, "x": 0.100, "b_total": 0.022}),
        nm.Branch("L45", "pi_line", ("b4", "b5"),
                  {"r": 0.010, "x": 0.088, "b_total": 0.019}),
        nm.Branch("L56", "pi_line", ("b5", "b6"),
                  {"r": 0.011, "x": 0.094, "b_total": 0.020}),
        nm.Branch("L61", "pi_line", ("b6", "b1"),
                  {"r": 0.012, "x": 0.098, "b_total": 0.021}),
        nm.Branch("T17", "transformer", ("b1", "b7"), xfmr(0.030)),
        nm.Branch("T48", "transformer", ("b4", "b8"), xfmr(0.030)),
        nm.Branch("L78", "pi_line", ("b7", "b8"),
                  {"r": 0.003, "x": 0.035, "b_total": 0.060}),
        nm.Branch("T9", "transformer", ("b9", "b1"), xfmr(0.12 * 100 / 620)),
        nm.Branch("T10", "transformer", ("b10", "b2"), xfmr(0.12 * 100 / 350)),
        nm.Branch("T11", "transformer", ("b11", "b3"), xfmr(0.12 * 100 / 500)),
        nm.Branch("T12", "transformer", ("b12", "b5"), xfmr(0.12 * 100 / 500)),
        nm.Branch("D2", "rl_load", ("b2",), load_z(120, 40)),
        nm.Branch("D3", "rl_load", ("b3",), load_z(150, 50)),
        nm.Branch("D4", "rl_load", ("b4",), load_z(180, 60)),
        nm.Branch("D5", "rl_load", ("b5",), load_z(100, 30)),
        nm.Branch("D6", "rl_load", ("b6",), load_z(140, 45)),
        nm.Branch("D8", "rl_load", ("b8",), load_z(200, 50)),
        nm.Branch("C4", "shunt_cap", ("b4",), {"b": 0.30}),
        nm.Branch("C6", "shunt_cap", ("b6",), {"b": 0.25}),
    )
    devices = (
        nm.Device("G9", "b9", nm.SG, rating=620.0, sg=SG),
        nm.Device("G10", "b10", nm.SG, rating=350.0, sg=SG),
        nm.Device("G11", "b11", nm.SG, rating=500.0, sg=SG),
        nm.Device("G12", "b12", nm.SG, rating=500.0, sg=SG),
    )
    net = nm.NetworkModel(frequency_hz=50.0, power_base_mva=100.0,
                          buses=buses, branches=branches, devices=devices)
    nm.validate_network(net)
    return net


def build_scenarios(net: nm.NetworkModel) -> nm.ScenarioSet:
    spec = nm.SynthesisSpec(
        curve=(0.75, 0.82, 0.88, 0.93, 0.98, 1.02, 1.06, 1.10, 1.04, 0.96,
               0.88, 0.80),
        shifts={"b3": 3, "b5": 6, "b8": 9},
        noise_amp=0.04, seed=20, variants=({},))
    return nm.synthesize_scenarios(net, spec)


def vet(net, sset) -> bool:
    ok = True
    for k, scen in enumerate(sset):
        sol = solve_power_flow(expand_sources(net), scen, tol=1e-12)
        asys = assemble(net, scen)
        res = equilibrium_residual(asys)
        sp = eigenvalues(asys.a,
                         angle_states=angle_state_mask(asys.state_labels))
        alpha = sp.abscissa()
        nz = int(sp.flags.sum())
        vmin = min(abs(v) for v in sol.voltage.values())
        good = res < 1e-6 and alpha < 0 and nz == 1 and vmin > 0.9
        ok = ok and good
        print(f"s{k:02d}: mis={sol.max_mismatch:.2e} res={res:.2e} "
              f"alpha={alpha:+.4f} zeros={nz} vmin={vmin:.3f} "
              f"{'OK' if good else 'BAD'}")
    for combo in (("G10",), ("G11",), ("G10", "G11"),
                  ("G10", "G11", "G12")):
        var = replace_with_ibr(net, combo)
        asys = assemble(var, sset.scenarios[0])
        res = equilibrium_residual(asys)
        sp = eigenvalues(asys.a,
                         angle_states=angle_state_mask(asys.state_labels))
        good = res < 1e-6 and sp.abscissa() < 0 and int(sp.flags.sum()) == 1
        ok = ok and good
        print(f"replace {','.join(combo):<12} states={asys.n_states:3d} "
              f"res={res:.2e} alpha={sp.abscissa():+.4f} "
              f"zeros={int(sp.flags.sum())} {'OK' if good else 'BAD'}")
    return ok


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--save", action="store_true",
                    help="rewrite the bundled data files after vetting")
    args = ap.parse_args()
    net = build_network()
    sset = build_scenarios(net)
    ok = vet(net, sset)
    if ok and args.save:
        nm.save_network(net, DATA_DIR / "example12.json")
        nm.save_scenarios(sset, DATA_DIR / "example12_scenarios.json")
        print(f"saved to {DATA_DIR}")
    print("ALL OK" if ok else "PROBLEMS")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
