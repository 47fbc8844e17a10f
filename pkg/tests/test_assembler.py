"""Interconnection against a hand-derived state matrix, ordering
invariance, equilibrium quality, and the structural error paths."""

import numpy as np
import pytest

import stabman as sm
import stabman.netmodel as nm
from stabman.assembler import (
    assemble, assemble_prepared, equilibrium_residual, interconnect,
    prepare_case, prune_unserved,
)
from stabman.components import Signal, Subsystem, i_pair, v_pair
from stabman.errors import AlgebraicLoopError, ValidationError

W = 2 * np.pi * 50.0


def chain_net(r_l=0.01, x_l=0.1, b=0.2, r_d=1.5, x_d=0.4):
    """Stiff source - series line - capacitor bus with an impedance load."""
    net = nm.NetworkModel(
        frequency_hz=50.0, power_base_mva=100.0,
        buses=(nm.Bus("s", "slack", 220.0, v_ref=1.0),
               nm.Bus("m", "pq", 220.0)),
        branches=(nm.Branch("tie", "pi_line", ("s", "m"),
                            {"r": r_l, "x": x_l, "b_total": 0.0}),
                  nm.Branch("ld", "rl_load", ("m",), {"r": r_d, "x": x_d}),
                  nm.Branch("bank", "shunt_cap", ("m",), {"b": b})),
        devices=(nm.Device("S", "s", nm.THEVENIN, rating=0.0,
                           thevenin=nm.TheveninParams(0.0, 0.0, 1.0)),),
    )
    return net, nm.nominal_scenario(net)


class TestHandOracle:
    def test_six_state_chain(self):
        r_l, x_l, b, r_d, x_d = 0.01, 0.1, 0.2, 1.5, 0.4
        net, scen = chain_net(r_l, x_l, b, r_d, x_d)
        asys = assemble(net, scen)
        assert asys.n_states == 6

        # hand derivation in the synchronous frame, source voltage fixed:
        # line current (s->m), bus voltage, load current
        w = W
        o = np.zeros((2, 2))
        cross = np.array([[0.0, w], [-w, 0.0]])
        a_line = -(r_l / x_l) * w * np.eye(2) + cross
        a_load = -(r_d / x_d) * w * np.eye(2) + cross
        hand = np.block([
            [a_line, -(w / x_l) * np.eye(2), o],
            [(w / b) * np.eye(2), cross, -(w / b) * np.eye(2)],
            [o, (w / x_d) * np.eye(2), a_load],
        ])
        order = ["tie:i_X", "tie:i_Y", "cap_m:v_X", "cap_m:v_Y",
                 "ld:i_X", "ld:i_Y"]
        perm = [asys.state_labels.index(s) for s in order]
        assert np.allclose(asys.a[np.ix_(perm, perm)], hand, atol=1e-9)

    def test_eigenvalues_of_chain(self):
        net, scen = chain_net()
        asys = assemble(net, scen)
        eig = np.linalg.eigvals(asys.a)
        assert max(eig.real) < 0
        # the capacitor pair oscillates near the LC natural frequency
        x_par = 1 / (1 / 0.1 + 1 / 0.4)
        f_lc = W / np.sqrt(x_par * 0.2)
        hf = eig[np.abs(eig.imag) > 2 * W]
        assert hf.size >= 2
        assert np.min(np.abs(np.abs(hf.imag) - f_lc)) / f_lc < 0.35


class TestOrderingInvariance:
    def test_branch_and_device_permutation(self, mixed_net):
        net, scen = mixed_net
        shuffled = nm.NetworkModel(
            frequency_hz=net.frequency_hz,
            power_base_mva=net.power_base_mva,
            buses=tuple(reversed(net.buses)),
            branches=tuple(reversed(net.branches)),
            devices=tuple(reversed(net.devices)),
        )
        a1 = assemble(net, scen)
        a2 = assemble(shuffled, scen)
        assert set(a1.state_labels) == set(a2.state_labels)
        perm = [a2.state_labels.index(s) for s in a1.state_labels]
        assert np.allclose(a1.a, a2.a[np.ix_(perm, perm)], atol=1e-10)

    def test_repeat_assembly_is_identical(self, ibr_net):
        net, scen = ibr_net
        a1 = assemble(net, scen)
        a2 = assemble(net, scen)
        assert a1.state_labels == a2.state_labels
        assert np.array_equal(a1.a, a2.a)


class TestEquilibrium:
    def test_sg_case(self, sg_net):
        asys = assemble(*sg_net)
        assert equilibrium_residual(asys) < 1e-8

    def test_ibr_case(self, ibr_net):
        asys = assemble(*ibr_net)
        assert equilibrium_residual(asys) < 1e-8

    def test_mixed_case(self, mixed_net):
        asys = assemble(*mixed_net)
        assert equilibrium_residual(asys) < 1e-8

    def test_mixed_case_has_single_frame_mode(self, mixed_net):
        # no stiff source: one zero eigenvalue from angle redundancy
        asys = assemble(*mixed_net)
        eig = np.linalg.eigvals(asys.a)
        near_zero = np.abs(eig) < 1e-6
        assert near_zero.sum() == 1

    def test_pinned_case_has_no_frame_mode(self, sg_net):
        asys = assemble(*sg_net)
        eig = np.linalg.eigvals(asys.a)
        assert np.min(np.abs(eig)) > 1e-4


class TestStructuralErrors:
    def test_conflicting_definers(self):
        from stabman.components import stiff_source
        s1 = stiff_source("s1", "x", 1.0 + 0j)
        s2 = stiff_source("s2", "x", 1.0 + 0j)
        with pytest.raises(ValidationError, match="conflicting voltage"):
            interconnect([s1, s2])

    def test_missing_definer(self):
        from stabman.components import rl_load
        ld = rl_load("ld", "x", 1.0, 0.5, W, 1.0 + 0j)
        with pytest.raises(ValidationError, match="no voltage source"):
            interconnect([ld])

    def test_algebraic_loop_names_participants(self):
        # two stateless feedthrough blocks closing a unit-gain cycle
        eye = np.eye(2)
        definer = Subsystem(
            name="defZ",
            state_labels=(),
            inputs=i_pair("x"), outputs=v_pair("x"),
            a=np.zeros((0, 0)), b=np.zeros((0, 2)),
            c=np.zeros((2, 0)), d=eye.copy(),
            x0=np.zeros(0), u0=np.zeros(2), y0=np.zeros(2))
        feed = Subsystem(
            name="gZ",
            state_labels=(),
            inputs=v_pair("x"), outputs=i_pair("x", +1),
            a=np.zeros((0, 0)), b=np.zeros((0, 2)),
            c=np.zeros((2, 0)), d=eye.copy(),
            x0=np.zeros(0), u0=np.zeros(2), y0=np.zeros(2))
        with pytest.raises(AlgebraicLoopError) as ei:
            interconnect([definer, feed])
        msg = str(ei.value)
        assert "defZ" in msg and "gZ" in msg


class TestPruning:
    def test_outaged_machine_strips_stub(self, sg_net):
        net, scen = sg_net
        scen.available["G1"] = False
        case = prepare_case(net, scen)
        bus_ids = {b.id for b in case.net.buses}
        assert "gen" not in bus_ids
        assert not any(br.id == "t1" for br in case.net.branches)
        asys = assemble_prepared(case)
        # line + load + capacitor pairs survive
        assert asys.n_states == 6

    def test_zero_load_multiplier_removes_branch(self, sg_net):
        net, scen = sg_net
        scen.load_multipliers["hv"] = 0.0
        pruned = prune_unserved(net, scen)
        assert not any(br.kind == "rl_load" for br in pruned.branches)

    def test_bare_junction_rejected(self):
        # two series lines meet at a bus with no device and no capacitance
        net = nm.NetworkModel(
            frequency_hz=50.0, power_base_mva=100.0,
            buses=(nm.Bus("s", "slack", 220.0, v_ref=1.0),
                   nm.Bus("j", "pq", 220.0),
                   nm.Bus("e", "pq", 220.0)),
            branches=(nm.Branch("l1", "pi_line", ("s", "j"),
                                {"r": 0.01, "x": 0.1, "b_total": 0.0}),
                      nm.Branch("l2", "pi_line", ("j", "e"),
                                {"r": 0.01, "x": 0.1, "b_total": 0.0}),
                      nm.Branch("ld", "rl_load", ("e",), {"r": 2.0, "x": 0.5})),
            devices=(nm.Device("S", "s", nm.THEVENIN, rating=0.0,
                               thevenin=nm.TheveninParams(0.0, 0.0, 1.0)),),
        )
        scen = nm.nominal_scenario(net)
        with pytest.raises(ValidationError, match="no voltage source"):
            assemble(net, scen)


class TestExternalInputs:
    def test_reference_channels_exposed(self, mixed_net):
        asys = assemble(*mixed_net)
        assert "G1:p_ref" in asys.input_labels
        assert "G1:v_ref" in asys.input_labels
        assert "W1:i_dc" in asys.input_labels
        # the governor reference must reach the machine states
        k = asys.input_labels.index("G1:p_ref")
        assert np.any(asys.b[:, k] != 0)

    def test_control_override_changes_dynamics(self, ibr_net):
        from dataclasses import replace
        net, scen = ibr_net
        base = assemble(net, scen)
        ctrl = net.device("W1").ibr[1]
        slow = replace(ctrl, k_p_pll=ctrl.k_p_pll / 4, k_i_pll=ctrl.k_i_pll / 16)
        mod = assemble(net, scen, control_overrides={"W1": slow})
        assert not np.allclose(base.a, mod.a)
        # equilibrium survives the gain change
        assert equilibrium_residual(mod) < 1e-8

    def test_unknown_override_rejected(self, ibr_net):
        net, scen = ibr_net
        with pytest.raises(ValidationError, match="unknown device"):
            assemble(net, scen, control_overrides={"nope": None})


class TestPassiveCache:
    def test_cached_passives_reproduce_assembly(self, ibr_net):
        from stabman.assembler import passive_subsystems
        net, scen = ibr_net
        case = prepare_case(net, scen)
        cache = passive_subsystems(case)
        a1 = assemble_prepared(case)
        a2 = assemble_prepared(case, passive_cache=cache)
        assert np.array_equal(a1.a, a2.a)
        assert a1.state_labels == a2.state_labels
