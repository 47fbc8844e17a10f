"""Synchronous machine with governor and excitation control.

Thirteen states: two-axis rotor flux model with one damper winding per
axis (subtransient saliency retained), a three-stage reheat turbine with
proportional-droop governor, and a rotating-exciter regulator with rate
feedback.  Speed-voltage terms keep their rotor-speed factor.

Per-unit on the machine MVA base; the ports carry system per-unit, so the
current inputs are scaled by ``i_scale`` = S_system / S_machine inside the
model.  Sign convention: the ``i`` inputs are current flowing INTO the
device; the stator equations use generator convention (current out), so
the model negates them.
"""

from __future__ import annotations

import cmath

import numpy as np

from .. import netmodel as nm
from .frames import to_machine
from .lin import DynamicsSpec, linearize
from .subsystem import Subsystem, ext, i_pair, v_pair

STATE_NAMES = ("delta", "omega", "e_q_t", "e_d_t", "psi_1d", "psi_2q",
               "p_sv", "p_ch", "p_rh", "v_m", "v_r", "e_fd", "x_f")
INPUT_NAMES = ("p_ref", "v_ref", "i_x", "i_y")
OUTPUT_NAMES = ("v_x", "v_y")
PARAM_NAMES = ("omega_nom", "i_scale",
               "x_d", "x_q", "x_d_t", "x_q_t", "x_d_st", "x_q_st", "x_l",
               "r_s", "t_d0_t", "t_q0_t", "t_d0_st", "t_q0_st", "h", "d_damp",
               "r_droop", "t_sv", "t_ch", "t_rh", "f_hp",
               "k_a", "t_a", "k_e", "t_e", "k_f", "t_f", "t_r")


def _gammas(p):
    g_d1 = (p.x_d_st - p.x_l) / (p.x_d_t - p.x_l)
    g_q1 = (p.x_q_st - p.x_l) / (p.x_q_t - p.x_l)
    g_d2 = (p.x_d_t - p.x_d_st) / (p.x_d_t - p.x_l) ** 2
    g_q2 = (p.x_q_t - p.x_q_st) / (p.x_q_t - p.x_l) ** 2
    return g_d1, g_q1, g_d2, g_q2


def _stator(x, u, p, m):
    """Shared algebra: machine-frame currents, fluxes, terminal voltage."""
    delta, omega, e_q_t, e_d_t, psi_1d, psi_2q = x[0:6]
    i_in_x, i_in_y = u[2], u[3]
    ig_x = -i_in_x * p.i_scale
    ig_y = -i_in_y * p.i_scale
    sd, cd = m.sin(delta), m.cos(delta)
    i_d = ig_x * sd - ig_y * cd
    i_q = ig_x * cd + ig_y * sd
    g_d1, g_q1, _, _ = _gammas(p)
    psi_d_st = g_d1 * e_q_t + (1 - g_d1) * psi_1d
    psi_q_st = -g_q1 * e_d_t + (1 - g_q1) * psi_2q
    psi_d = -p.x_d_st * i_d + psi_d_st
    psi_q = -p.x_q_st * i_q + psi_q_st
    v_d = -p.r_s * i_d - omega * psi_q
    v_q = -p.r_s * i_q + omega * psi_d
    return i_d, i_q, psi_d, psi_q, v_d, v_q, sd, cd


def _f_sg(x, u, p, m):
    (delta, omega, e_q_t, e_d_t, psi_1d, psi_2q,
     p_sv, p_ch, p_rh, v_m, v_r, e_fd, x_f) = x
    p_ref, v_ref = u[0], u[1]
    i_d, i_q, psi_d, psi_q, v_d, v_q, _, _ = _stator(x, u, p, m)
    g_d1, g_q1, g_d2, g_q2 = _gammas(p)

    t_e = psi_d * i_q - psi_q * i_d
    p_m = p.f_hp * p_ch + (1 - p.f_hp) * p_rh
    v_t = m.sqrt(v_d * v_d + v_q * v_q)
    v_fb = (p.k_f / p.t_f) * e_fd - x_f

    d_delta = p.omega_nom * (omega - 1.0)
    d_omega = (p_m / omega - t_e - p.d_damp * (omega - 1.0)) / (2.0 * p.h)
    d_e_q_t = (-e_q_t - (p.x_d - p.x_d_t)
               * (g_d1 * i_d - g_d2 * psi_1d + g_d2 * e_q_t)
               + e_fd) / p.t_d0_t
    d_e_d_t = (-e_d_t + (p.x_q - p.x_q_t)
               * (g_q1 * i_q - g_q2 * psi_2q - g_q2 * e_d_t)) / p.t_q0_t
    d_psi_1d = (-psi_1d + e_q_t - (p.x_d_t - p.x_l) * i_d) / p.t_d0_st
    d_psi_2q = (-psi_2q - e_d_t - (p.x_q_t - p.x_l) * i_q) / p.t_q0_st
    d_p_sv = (p_ref + (1.0 - omega) / p.r_droop - p_sv) / p.t_sv
    d_p_ch = (p_sv - p_ch) / p.t_ch
    d_p_rh = (p_ch - p_rh) / p.t_rh
    d_v_m = (v_t - v_m) / p.t_r
    d_v_r = (p.k_a * (v_ref - v_m - v_fb) - v_r) / p.t_a
    d_e_fd = (v_r - p.k_e * e_fd) / p.t_e
    d_x_f = (-x_f + (p.k_f / p.t_f) * e_fd) / p.t_f
    return [d_delta, d_omega, d_e_q_t, d_e_d_t, d_psi_1d, d_psi_2q,
            d_p_sv, d_p_ch, d_p_rh, d_v_m, d_v_r, d_e_fd, d_x_f]


def _g_sg(x, u, p, m):
    _, _, _, _, v_d, v_q, sd, cd = _stator(x, u, p, m)
    v_x = v_d * sd + v_q * cd
    v_y = v_q * sd - v_d * cd
    return [v_x, v_y]


SG_SPEC = DynamicsSpec(
    name="sg13",
    state_names=STATE_NAMES,
    input_names=INPUT_NAMES,
    output_names=OUTPUT_NAMES,
    param_names=PARAM_NAMES,
    f=_f_sg,
    g=_g_sg,
)


def sg_param_dict(sg: nm.SgParams, omega_nom: float, i_scale: float) -> dict:
    p = {n: getattr(sg, n) for n in
         ("x_d", "x_q", "x_d_t", "x_q_t", "x_d_st", "x_q_st", "x_l",
          "r_s", "t_d0_t", "t_q0_t", "t_d0_st", "t_q0_st", "h", "d_damp")}
    p.update({n: getattr(sg.governor, n) for n in
              ("r_droop", "t_sv", "t_ch", "t_rh", "f_hp")})
    p.update({n: getattr(sg.avr, n) for n in
              ("k_a", "t_a", "k_e", "t_e", "k_f", "t_f", "t_r")})
    p["omega_nom"] = omega_nom
    p["i_scale"] = i_scale
    return p


def init_sg(sg: nm.SgParams, v0: complex, ig: complex) -> tuple:
    """Exact equilibrium from terminal voltage and generator current,
    both machine per-unit.  Returns (x0, p_ref, v_ref)."""
    delta = cmath.phase(v0 + complex(sg.r_s, sg.x_q) * ig)
    i_d, i_q = to_machine(ig, delta)
    v_d, v_q = to_machine(v0, delta)
    g_d1 = (sg.x_d_st - sg.x_l) / (sg.x_d_t - sg.x_l)
    g_d2 = (sg.x_d_t - sg.x_d_st) / (sg.x_d_t - sg.x_l) ** 2

    psi_d = v_q + sg.r_s * i_q
    psi_q = -(v_d + sg.r_s * i_d)
    e_q_t = (psi_d + sg.x_d_st * i_d) + (1 - g_d1) * (sg.x_d_t - sg.x_l) * i_d
    psi_1d = e_q_t - (sg.x_d_t - sg.x_l) * i_d
    e_d_t = (sg.x_q - sg.x_q_t) * i_q
    psi_2q = -e_d_t - (sg.x_q_t - sg.x_l) * i_q
    e_fd = e_q_t + (sg.x_d - sg.x_d_t) \
        * (g_d1 * i_d - g_d2 * psi_1d + g_d2 * e_q_t)
    t_e = psi_d * i_q - psi_q * i_d
    v_t = abs(v0)
    v_r = sg.avr.k_e * e_fd
    v_ref = v_t + v_r / sg.avr.k_a
    x_f = sg.avr.k_f * e_fd / sg.avr.t_f

    x0 = np.array([delta, 1.0, e_q_t, e_d_t, psi_1d, psi_2q,
                   t_e, t_e, t_e, v_t, v_r, e_fd, x_f])
    return x0, t_e, v_ref


def build_sg(dev: nm.Device, v0: complex, i_inj: complex, s_sys_mva: float,
             omega_nom: float) -> Subsystem:
    """Linearized machine subsystem at the given operating point.

    ``v0`` is the bus voltage and ``i_inj`` the device current into the
    network, both system per-unit.
    """
    i_scale = s_sys_mva / dev.mva_base()
    params = sg_param_dict(dev.sg, omega_nom, i_scale)
    x0, p_ref, v_ref = init_sg(dev.sg, v0, i_inj * i_scale)
    u0 = np.array([p_ref, v_ref, -i_inj.real, -i_inj.imag])
    linz = linearize(SG_SPEC, x0, u0, params)
    return Subsystem(
        name=dev.id,
        state_labels=tuple(f"{dev.id}:{s}" for s in STATE_NAMES),
        inputs=(ext(f"{dev.id}:p_ref"), ext(f"{dev.id}:v_ref"))
        + i_pair(dev.bus),
        outputs=v_pair(dev.bus),
        a=linz.a, b=linz.b, c=linz.c, d=linz.d,
        x0=x0, u0=u0, y0=linz.y0,
        spec_name=SG_SPEC.name,
        params=tuple(params[n] for n in PARAM_NAMES),
    )
