"""Shared fixtures: canonical device parameter sets and small networks.

The converter unit is a 5 MVA / 690 V machine with an LC output filter;
the synchronous machine is a 2.2-style round-rotor set.  Both are reused
across the test modules so oracle values stay comparable.
"""

import pytest

import stabman.netmodel as nm


@pytest.fixture
def ibr_phys():
    return nm.IbrPhysicalParams(
        r=0.05, l=0.15, c_f=0.05, r_f=0.0016, c=0.015,
        s_base=5e6, v_base_ac=690.0, v_base_dc=1500.0)


@pytest.fixture
def ibr_ctrl():
    return nm.IbrControlParams(
        k_p_pll=62.8, k_i_pll=785.0, k_p_i=0.9, k_i_i=170.0,
        k_p_dc=1.27, k_i_dc=48.0, dc_variant="vdc")


@pytest.fixture
def sg_params():
    return nm.SgParams(
        x_d=1.8, x_q=1.7, x_d_t=0.3, x_q_t=0.55, x_d_st=0.25,
        x_q_st=0.25, x_l=0.2, r_s=0.003,
        t_d0_t=8.0, t_q0_t=0.4, t_d0_st=0.03, t_q0_st=0.05,
        h=6.5, d_damp=0.0,
        governor=nm.GovernorParams(),
        avr=nm.AvrParams())


def _grid_device():
    return nm.Device("GRID", "grid", nm.THEVENIN, rating=0.0,
                     thevenin=nm.TheveninParams(0.0, 0.0, 1.0))


@pytest.fixture
def ibr_net(ibr_phys, ibr_ctrl):
    """70 aggregated converter units behind a short line into a stiff bus."""
    net = nm.NetworkModel(
        frequency_hz=50.0, power_base_mva=100.0,
        buses=(nm.Bus("poc", "pq", 690.0),
               nm.Bus("grid", "slack", 690.0, v_ref=1.0)),
        branches=(nm.Branch("zg", "pi_line", ("poc", "grid"),
                            {"r": 0.006, "x": 0.06, "b_total": 0.0}),),
        devices=(nm.Device("W1", "poc", nm.IBR, rating=350.0,
                           ibr=(ibr_phys, ibr_ctrl, 70)),
                 _grid_device()),
    )
    scen = nm.nominal_scenario(net)
    scen.dispatch["W1"] = nm.Dispatch(p_mw=200.0, v_ref=1.0)
    return net, scen


@pytest.fixture
def sg_net(sg_params):
    """One machine through a step-up reactance into a stiff bus, with a
    local load so the power flow is nontrivial."""
    net = nm.NetworkModel(
        frequency_hz=50.0, power_base_mva=100.0,
        buses=(nm.Bus("gen", "pv", 22.0, v_ref=1.02),
               nm.Bus("hv", "pq", 220.0),
               nm.Bus("grid", "slack", 220.0, v_ref=1.0)),
        branches=(nm.Branch("t1", "pi_line", ("gen", "hv"),
                            {"r": 0.002, "x": 0.12, "b_total": 0.0}),
                  nm.Branch("line", "pi_line", ("hv", "grid"),
                            {"r": 0.01, "x": 0.1, "b_total": 0.0}),
                  nm.Branch("load", "rl_load", ("hv",),
                            {"r": 1.2, "x": 0.4}),
                  nm.Branch("cap_hv", "shunt_cap", ("hv",), {"b": 0.04})),
        devices=(nm.Device("G1", "gen", nm.SG, rating=247.5, sg=sg_params),
                 _grid_device()),
    )
    scen = nm.nominal_scenario(net)
    scen.dispatch["G1"] = nm.Dispatch(p_mw=150.0, v_ref=1.02)
    return net, scen


@pytest.fixture
def mixed_net(sg_params, ibr_phys, ibr_ctrl):
    """Machine and converter sharing a transmission corridor; the machine
    holds the slack.  No external stiff source."""
    net = nm.NetworkModel(
        frequency_hz=50.0, power_base_mva=100.0,
        buses=(nm.Bus("gen", "slack", 22.0, v_ref=1.02),
               nm.Bus("hv1", "pq", 220.0),
               nm.Bus("hv2", "pq", 220.0),
               nm.Bus("poc", "pq", 0.69)),
        branches=(nm.Branch("t1", "pi_line", ("gen", "hv1"),
                            {"r": 0.002, "x": 0.1, "b_total": 0.0}),
                  nm.Branch("l12", "pi_line", ("hv1", "hv2"),
                            {"r": 0.008, "x": 0.08, "b_total": 0.02}),
                  nm.Branch("t2", "pi_line", ("poc", "hv2"),
                            {"r": 0.004, "x": 0.1, "b_total": 0.0}),
                  nm.Branch("load1", "rl_load", ("hv1",),
                            {"r": 0.9, "x": 0.35}),
                  nm.Branch("load2", "rl_load", ("hv2",),
                            {"r": 1.6, "x": 0.5})),
        devices=(nm.Device("G1", "gen", nm.SG, rating=500.0, sg=sg_params),
                 nm.Device("W1", "poc", nm.IBR, rating=350.0,
                           ibr=(ibr_phys, ibr_ctrl, 70))),
    )
    scen = nm.nominal_scenario(net)
    scen.dispatch["G1"] = nm.Dispatch(p_mw=120.0, v_ref=1.02)
    scen.dispatch["W1"] = nm.Dispatch(p_mw=140.0, v_ref=1.0)
    return net, scen
