"""Newton power flow against closed-form and linear-circuit oracles."""

import numpy as np
import pytest
from scipy.optimize import brentq

import stabman.netmodel as nm
from stabman.errors import NumericalError
from stabman import powerflow as pf


def grid_dev(bus="grid", v=1.0):
    return nm.Device("S", bus, nm.THEVENIN, rating=0.0,
                     thevenin=nm.TheveninParams(0.0, 0.0, v))


def two_bus(ibr_phys, ibr_ctrl, r, x, p_mw, v_ref=1.0, n_units=70):
    net = nm.NetworkModel(
        frequency_hz=50.0, power_base_mva=100.0,
        buses=(nm.Bus("poc", "pq", 0.69),
               nm.Bus("grid", "slack", 220.0, v_ref=1.0)),
        branches=(nm.Branch("zg", "pi_line", ("poc", "grid"),
                            {"r": r, "x": x, "b_total": 0.0}),),
        devices=(nm.Device("W", "poc", nm.IBR, rating=350.0,
                           ibr=(ibr_phys, ibr_ctrl, n_units)),
                 grid_dev()),
    )
    scen = nm.nominal_scenario(net)
    scen.dispatch["W"] = nm.Dispatch(p_mw=p_mw, v_ref=v_ref)
    return net, scen


class TestFlatCases:
    def test_no_load_network_is_flat(self):
        net = nm.NetworkModel(
            frequency_hz=50.0, power_base_mva=100.0,
            buses=(nm.Bus("a", "slack", 220.0, v_ref=1.0),
                   nm.Bus("b", "pq", 220.0),
                   nm.Bus("c", "pq", 220.0)),
            branches=(nm.Branch("l1", "pi_line", ("a", "b"),
                                {"r": 0.01, "x": 0.1, "b_total": 0.0}),
                      nm.Branch("l2", "pi_line", ("b", "c"),
                                {"r": 0.01, "x": 0.1, "b_total": 0.0})),
            devices=(grid_dev("a"),),
        )
        sol = pf.solve_power_flow(net)
        for b in ("a", "b", "c"):
            assert sol.voltage[b] == pytest.approx(1.0 + 0.0j, abs=1e-10)

    def test_slack_voltage_setpoint_respected(self):
        net = nm.NetworkModel(
            frequency_hz=50.0, power_base_mva=100.0,
            buses=(nm.Bus("a", "slack", 220.0, v_ref=1.05),
                   nm.Bus("b", "pq", 220.0)),
            branches=(nm.Branch("l", "pi_line", ("a", "b"),
                                {"r": 0.01, "x": 0.1, "b_total": 0.0}),
                      nm.Branch("ld", "rl_load", ("b",), {"r": 2.0, "x": 0.5})),
            devices=(grid_dev("a", 1.05),),
        )
        sol = pf.solve_power_flow(net)
        assert abs(sol.voltage["a"]) == pytest.approx(1.05, abs=1e-12)
        assert np.angle(sol.voltage["a"]) == pytest.approx(0.0, abs=1e-12)


class TestLinearOracle:
    """Constant-impedance networks have a linear solution; build the
    admittance matrix by hand and compare."""

    def test_three_bus_chain_with_loads(self):
        z1, z2 = 0.01 + 0.1j, 0.02 + 0.15j
        zl_b, zl_c = 2.0 + 0.5j, 1.5 + 0.4j
        bsh = 0.1
        net = nm.NetworkModel(
            frequency_hz=50.0, power_base_mva=100.0,
            buses=(nm.Bus("a", "slack", 220.0, v_ref=1.0),
                   nm.Bus("b", "pq", 220.0),
                   nm.Bus("c", "pq", 220.0)),
            branches=(nm.Branch("l1", "pi_line", ("a", "b"),
                                {"r": z1.real, "x": z1.imag, "b_total": 0.0}),
                      nm.Branch("l2", "pi_line", ("b", "c"),
                                {"r": z2.real, "x": z2.imag, "b_total": 0.0}),
                      nm.Branch("ld_b", "rl_load", ("b",),
                                {"r": zl_b.real, "x": zl_b.imag}),
                      nm.Branch("ld_c", "rl_load", ("c",),
                                {"r": zl_c.real, "x": zl_c.imag}),
                      nm.Branch("sc_c", "shunt_cap", ("c",), {"b": bsh})),
            devices=(grid_dev("a"),),
        )
        y1, y2 = 1 / z1, 1 / z2
        y = np.array([[y1, -y1, 0],
                      [-y1, y1 + y2 + 1 / zl_b, -y2],
                      [0, -y2, y2 + 1 / zl_c + 1j * bsh]])
        v_red = np.linalg.solve(y[1:, 1:], -y[1:, 0] * 1.0)
        sol = pf.solve_power_flow(net, tol=1e-12)
        assert sol.voltage["b"] == pytest.approx(v_red[0], abs=1e-10)
        assert sol.voltage["c"] == pytest.approx(v_red[1], abs=1e-10)

    def test_load_multiplier_scales_admittance(self):
        z, zl = 0.01 + 0.1j, 2.0 + 0.5j
        net = nm.NetworkModel(
            frequency_hz=50.0, power_base_mva=100.0,
            buses=(nm.Bus("a", "slack", 220.0, v_ref=1.0),
                   nm.Bus("b", "pq", 220.0)),
            branches=(nm.Branch("l", "pi_line", ("a", "b"),
                                {"r": z.real, "x": z.imag, "b_total": 0.0}),
                      nm.Branch("ld", "rl_load", ("b",),
                                {"r": zl.real, "x": zl.imag})),
            devices=(grid_dev("a"),),
        )
        scen = nm.nominal_scenario(net)
        scen.load_multipliers["b"] = 1.7
        sol = pf.solve_power_flow(net, scen, tol=1e-12)
        # admittance scaling: y_load -> 1.7 / zl
        v_expect = (1.0 / z) / (1 / z + 1.7 / zl)
        assert sol.voltage["b"] == pytest.approx(v_expect, abs=1e-10)


class TestDroopBusOracle:
    """Converter bus: fixed P, droop Q(|V|).  The bus voltage solves a
    scalar fixed-point equation derived from the power balance, solved
    here independently by bracketing."""

    def test_two_bus_against_scalar_equation(self, ibr_phys, ibr_ctrl):
        r, x, p_mw = 0.006, 0.06, 200.0
        net, scen = two_bus(ibr_phys, ibr_ctrl, r, x, p_mw)
        sol = pf.solve_power_flow(net, scen, tol=1e-12)

        # Injection S = P + jQ(|V|) at the sending end of z toward a unit
        # slack: with u = |V|^2 and S conj(z) = a + jb the balance
        # V conj((V - V1)/z) = S collapses to a quadratic in u and the
        # phasor recovers as V = u - S conj(z).
        z = complex(r, x)
        p = p_mw / 100.0
        scale = 350.0 / 100.0  # device base to system base
        kq = ibr_ctrl.droop_q * scale
        q0 = ibr_ctrl.q_ref * scale

        def s_of_u(u):
            return complex(p, q0 + kq * (1.0 - np.sqrt(u)))

        def resid(u):
            sz = s_of_u(u) * z.conjugate()
            return u * u - u * (2 * sz.real + 1.0) + abs(sz) ** 2

        u = brentq(resid, 0.81, 1.44, xtol=1e-15)
        v_expect = u - s_of_u(u) * z.conjugate()
        assert abs(sol.voltage["poc"]) == pytest.approx(np.sqrt(u), abs=1e-9)
        assert sol.voltage["poc"] == pytest.approx(v_expect, abs=1e-9)

    def test_injection_matches_droop_law(self, ibr_phys, ibr_ctrl):
        net, scen = two_bus(ibr_phys, ibr_ctrl, 0.006, 0.06, 200.0)
        sol = pf.solve_power_flow(net, scen, tol=1e-12)
        s_inj = sol.injection_power("poc")
        scale = 350.0 / 100.0
        vmag = abs(sol.voltage["poc"])
        q_expect = (ibr_ctrl.q_ref + ibr_ctrl.droop_q * (1.0 - vmag)) * scale
        assert s_inj.real == pytest.approx(2.0, abs=1e-9)
        assert s_inj.imag == pytest.approx(q_expect, abs=1e-9)


class TestPvBus:
    def test_magnitude_pinned_and_p_dispatched(self, sg_net):
        net, scen = sg_net
        sol = pf.solve_power_flow(net, scen, tol=1e-12)
        assert abs(sol.voltage["gen"]) == pytest.approx(1.02, abs=1e-12)
        assert sol.injection_power("gen").real == pytest.approx(1.5, abs=1e-9)

    def test_outaged_machine_degrades_to_pq(self, sg_net):
        net, scen = sg_net
        scen.available["G1"] = False
        sol = pf.solve_power_flow(net, scen, tol=1e-12)
        # no machine: zero injection, magnitude floats below setpoint
        assert abs(sol.injection_power("gen")) < 1e-9
        assert abs(sol.voltage["gen"]) < 1.02


class TestSourceExpansion:
    def test_impedance_source_gets_hidden_bus(self):
        net = nm.NetworkModel(
            frequency_hz=50.0, power_base_mva=100.0,
            buses=(nm.Bus("grid", "slack", 220.0, v_ref=1.0),
                   nm.Bus("b", "pq", 220.0)),
            branches=(nm.Branch("l", "pi_line", ("grid", "b"),
                                {"r": 0.01, "x": 0.1, "b_total": 0.0}),
                      nm.Branch("ld", "rl_load", ("b",), {"r": 2.0, "x": 0.5})),
            devices=(nm.Device("S", "grid", nm.THEVENIN, rating=0.0,
                               thevenin=nm.TheveninParams(0.005, 0.08, 1.0)),),
        )
        x = pf.expand_sources(net)
        bus_ids = {b.id for b in x.buses}
        assert "S__src" in bus_ids
        assert x.bus("S__src").role == "slack"
        assert x.bus("grid").role == "pq"
        zb = next(b for b in x.branches if b.id == "S__z")
        assert zb.params["r"] == pytest.approx(0.005)
        assert zb.params["x"] == pytest.approx(0.08)
        # source voltage held behind the impedance
        sol = pf.solve_power_flow(net, tol=1e-12)
        assert abs(sol.voltage["S__src"]) == pytest.approx(1.0, abs=1e-12)
        assert abs(sol.voltage["grid"]) < 1.0

    def test_ideal_source_unchanged(self, ibr_net):
        net, _ = ibr_net
        x = pf.expand_sources(net)
        assert {b.id for b in x.buses} == {b.id for b in net.buses}


class TestTransformer:
    def test_two_port_matches_star_mesh_reduction(self):
        prm = {"r1": 0.004, "x1": 0.08, "r2": 0.004, "x2": 0.08,
               "r_m": 500.0, "x_m": 50.0}
        net = nm.NetworkModel(
            frequency_hz=50.0, power_base_mva=100.0,
            buses=(nm.Bus("a", "slack", 220.0, v_ref=1.0),
                   nm.Bus("b", "pq", 22.0)),
            branches=(nm.Branch("t", "transformer", ("a", "b"), prm),
                      nm.Branch("ld", "rl_load", ("b",), {"r": 2.0, "x": 0.5})),
            devices=(grid_dev("a"),),
        )
        scen = nm.nominal_scenario(net)
        y = pf.build_ybus(net, scen)
        y1 = 1 / complex(prm["r1"], prm["x1"])
        y2 = 1 / complex(prm["r2"], prm["x2"])
        ym = 1 / prm["r_m"] + 1 / complex(0, prm["x_m"])
        den = y1 + y2 + ym
        yl = 1 / complex(2.0, 0.5)
        expect = np.array([[y1 * (y2 + ym) / den, -y1 * y2 / den],
                           [-y1 * y2 / den, y2 * (y1 + ym) / den + yl]])
        assert np.allclose(y, expect, atol=1e-14)


class TestFailureModes:
    def test_collapse_beyond_max_transfer(self, ibr_phys, ibr_ctrl):
        net, scen = two_bus(ibr_phys, ibr_ctrl, 0.025, 0.25, 340.0)
        with pytest.raises(NumericalError):
            pf.solve_power_flow(net, scen)

    def test_iteration_budget_respected(self, ibr_net):
        net, scen = ibr_net
        with pytest.raises(NumericalError):
            pf.solve_power_flow(net, scen, tol=1e-12, max_iter=1)

    def test_converged_within_tolerance(self, ibr_net):
        net, scen = ibr_net
        sol = pf.solve_power_flow(net, scen, tol=1e-10)
        assert sol.max_mismatch < 1e-10
        assert sol.iterations <= 10
