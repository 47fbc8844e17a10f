"""Grid-following converter with LC filter, PLL, and cascaded control.

Ten states: filter inductor current and capacitor voltage pairs in the
controller dq frame, the dc-link voltage, the PLL angle and integrator,
two current-loop integrators, and the dc-loop integrator.

Control structure: a PLL aligns the d-axis with the point-of-connection
voltage; active power command comes from a frequency droop corrected by
the dc-voltage regulator (either on v_dc or on its square); reactive
command from a voltage droop; both are turned into current references and
tracked by PI loops with cross-coupling compensation.

An n-unit paralleled plant uses the same per-unit model on the n-fold MVA
base: per-unit scale invariance makes the internal dynamics independent of
the unit count, which only enters through the port current scaling.
"""

from __future__ import annotations

import cmath

import numpy as np

from .. import netmodel as nm
from .frames import to_local
from .lin import DynamicsSpec, linearize
from .subsystem import Subsystem, ext, i_pair, v_pair

STATE_NAMES = ("i_sd", "i_sq", "v_fd", "v_fq", "v_dc", "theta",
               "x_pll", "x_id", "x_iq", "x_dc")
INPUT_NAMES = ("i_dc", "v_ref", "i_x", "i_y")
OUTPUT_NAMES = ("v_x", "v_y")
PARAM_NAMES = ("omega_nom", "i_scale", "r", "l", "c_f", "r_f", "tau_dc",
               "k_p_pll", "k_i_pll", "k_p_i", "k_i_i", "k_p_dc", "k_i_dc",
               "droop_p", "droop_q", "k_pq", "q_ref", "v_dc_ref", "omega_ref",
               "v_meas")


def _make_f(squared: bool):
    def f(x, u, p, m):
        (i_sd, i_sq, v_fd, v_fq, v_dc, theta,
         x_pll, x_id, x_iq, x_dc) = x
        i_dc_in, v_ref = u[0], u[1]
        st, ct = m.sin(theta), m.cos(theta)
        # network current into the device, controller frame, device base
        ii_d = (u[2] * ct + u[3] * st) * p.i_scale
        ii_q = (u[3] * ct - u[2] * st) * p.i_scale
        i_fd = i_sd + ii_d
        i_fq = i_sq + ii_q
        v_pd = v_fd + p.r_f * i_fd
        v_pq = v_fq + p.r_f * i_fq

        # phase tracking; theta is measured against the synchronous frame
        theta_dot = p.omega_nom * p.omega_ref + p.k_p_pll * v_pq - x_pll
        d_x_pll = p.k_i_pll * (0.0 - v_pq)
        omega_pu = theta_dot / p.omega_nom
        # droop reads the PLL frequency estimate (integrator), not the
        # instantaneous rate with its wideband proportional term
        omega_est = p.omega_ref - x_pll / p.omega_nom

        p_droop = p.droop_p * (p.omega_ref - omega_est)
        if squared:
            e_dc = p.v_dc_ref * p.v_dc_ref - v_dc * v_dc
        else:
            e_dc = p.v_dc_ref - v_dc
        u_dc = p.k_p_dc * e_dc + x_dc
        d_x_dc = p.k_i_dc * e_dc
        p_cmd = p_droop - u_dc
        # Plant-level magnitude measurements are heavily filtered; within
        # this model's bandwidth they are the constant v_meas.  The PLL,
        # current, and dc loops stay fully dynamic.
        q_cmd = p.q_ref + p.droop_q * (v_ref - p.v_meas)
        i_d_ref = p.k_pq * p_cmd / p.v_meas
        i_q_ref = -p.k_pq * q_cmd / p.v_meas
        u_d = p.k_p_i * (i_d_ref - i_sd) + x_id
        u_q = p.k_p_i * (i_q_ref - i_sq) + x_iq
        d_x_id = p.k_i_i * (i_d_ref - i_sd)
        d_x_iq = p.k_i_i * (i_q_ref - i_sq)
        # Modulation with rotation decoupling only.  The terminal voltage
        # is left to the PI as a disturbance; the proportional gain then
        # presents a positive damping resistance to the filter resonance.
        v_cd = u_d - omega_pu * p.l * i_sq
        v_cq = u_q + omega_pu * p.l * i_sd

        d_i_sd = (p.omega_nom / p.l) * (v_cd - v_pd - p.r * i_sd) \
            + theta_dot * i_sq
        d_i_sq = (p.omega_nom / p.l) * (v_cq - v_pq - p.r * i_sq) \
            - theta_dot * i_sd
        d_v_fd = (p.omega_nom / p.c_f) * i_fd + theta_dot * v_fq
        d_v_fq = (p.omega_nom / p.c_f) * i_fq - theta_dot * v_fd

        p_conv = v_cd * i_sd + v_cq * i_sq
        d_v_dc = (i_dc_in - p_conv / v_dc) / p.tau_dc
        d_theta = theta_dot - p.omega_nom
        return [d_i_sd, d_i_sq, d_v_fd, d_v_fq, d_v_dc, d_theta,
                d_x_pll, d_x_id, d_x_iq, d_x_dc]

    return f


def _g_ibr(x, u, p, m):
    i_sd, i_sq, v_fd, v_fq = x[0], x[1], x[2], x[3]
    theta = x[5]
    st, ct = m.sin(theta), m.cos(theta)
    ii_d = (u[2] * ct + u[3] * st) * p.i_scale
    ii_q = (u[3] * ct - u[2] * st) * p.i_scale
    v_pd = v_fd + p.r_f * (i_sd + ii_d)
    v_pq = v_fq + p.r_f * (i_sq + ii_q)
    v_x = v_pd * ct - v_pq * st
    v_y = v_pd * st + v_pq * ct
    return [v_x, v_y]


IBR_SPECS = {
    "vdc": DynamicsSpec(name="ibr_vdc", state_names=STATE_NAMES,
                        input_names=INPUT_NAMES, output_names=OUTPUT_NAMES,
                        param_names=PARAM_NAMES, f=_make_f(False), g=_g_ibr),
    "vdc2": DynamicsSpec(name="ibr_vdc2", state_names=STATE_NAMES,
                         input_names=INPUT_NAMES, output_names=OUTPUT_NAMES,
                         param_names=PARAM_NAMES, f=_make_f(True), g=_g_ibr),
}


def ibr_param_vector(phys: nm.IbrPhysicalParams, ctrl: nm.IbrControlParams,
                     omega_nom: float, i_scale: float,
                     q_ref: float | None = None,
                     v_meas: float = 1.0) -> dict:
    """Model parameter dict from unit hardware and control records.

    The active dc-loop gain pair is routed into the k_p_dc/k_i_dc slots;
    the variant picks the error shape.  ``q_ref`` overrides the control
    record value (the initializer back-solves the operating-point value);
    ``v_meas`` is the filtered magnitude measurement shared by the
    droop and the power-to-current path.
    """
    tau_dc = phys.c * phys.v_base_dc ** 2 / phys.s_base
    if ctrl.dc_variant == "vdc":
        kp, ki = ctrl.k_p_dc, ctrl.k_i_dc
    else:
        kp, ki = ctrl.k_p_2dc, ctrl.k_i_2dc
    return {
        "omega_nom": omega_nom, "i_scale": i_scale,
        "r": phys.r, "l": phys.l, "c_f": phys.c_f, "r_f": phys.r_f,
        "tau_dc": tau_dc,
        "k_p_pll": ctrl.k_p_pll, "k_i_pll": ctrl.k_i_pll,
        "k_p_i": ctrl.k_p_i, "k_i_i": ctrl.k_i_i,
        "k_p_dc": kp, "k_i_dc": ki,
        "droop_p": ctrl.droop_p, "droop_q": ctrl.droop_q,
        "k_pq": ctrl.k_pq,
        "q_ref": ctrl.q_ref if q_ref is None else q_ref,
        "v_dc_ref": ctrl.v_dc_ref, "omega_ref": ctrl.omega_ref,
        "v_meas": v_meas,
    }


def init_ibr(phys: nm.IbrPhysicalParams, ctrl: nm.IbrControlParams,
             v0: complex, i_out: complex, v_ref_droop: float,
             omega_nom: float) -> tuple:
    """Exact equilibrium from terminal voltage and device output current,
    both device per-unit.  Returns (x0, i_dc0, q_ref_eff).

    ``q_ref_eff`` absorbs the reactive power of the filter branch so the
    closed-loop equilibrium matches the network solution exactly.
    """
    theta = cmath.phase(v0)
    v_pd = abs(v0)
    i_out_d, i_out_q = to_local(i_out, theta)
    # filter branch: series r_f into the capacitor
    z_leg = complex(phys.r_f, -1.0 / phys.c_f)
    i_f = complex(v_pd, 0.0) / z_leg
    i_s = i_f + complex(i_out_d, i_out_q)
    v_f = complex(v_pd, 0.0) - phys.r_f * i_f
    v_c = complex(v_pd, 0.0) + complex(phys.r, phys.l) * i_s

    # integrators carry the terminal voltage (no feedforward in modulation)
    x_id = v_pd + phys.r * i_s.real
    x_iq = phys.r * i_s.imag
    p_cmd = i_s.real * v_pd / ctrl.k_pq
    q_cmd = -i_s.imag * v_pd / ctrl.k_pq
    x_dc = -p_cmd + ctrl.droop_p * (ctrl.omega_ref - 1.0)
    q_ref_eff = q_cmd - ctrl.droop_q * (v_ref_droop - v_pd)
    x_pll = omega_nom * (ctrl.omega_ref - 1.0)
    p_conv = v_c.real * i_s.real + v_c.imag * i_s.imag
    i_dc0 = p_conv / ctrl.v_dc_ref

    x0 = np.array([i_s.real, i_s.imag, v_f.real, v_f.imag,
                   ctrl.v_dc_ref, theta, x_pll, x_id, x_iq, x_dc])
    return x0, i_dc0, q_ref_eff


def build_ibr(dev: nm.Device, v0: complex, i_inj: complex, s_sys_mva: float,
              omega_nom: float, v_ref_droop: float | None = None,
              control_override: nm.IbrControlParams | None = None) -> Subsystem:
    """Linearized converter subsystem at the given operating point.

    The model runs on the aggregate device base (n x unit base); per-unit
    parameters are the unit values.  ``control_override`` swaps the gain
    record, used by the tuner.
    """
    phys, ctrl, n = dev.ibr
    if control_override is not None:
        ctrl = control_override
    if v_ref_droop is None:
        v_ref_droop = ctrl.v_d_ref
    i_scale = s_sys_mva / dev.mva_base()
    x0, i_dc0, q_ref_eff = init_ibr(phys, ctrl, v0, i_inj * i_scale,
                                    v_ref_droop, omega_nom)
    params = ibr_param_vector(phys, ctrl, omega_nom, i_scale,
                              q_ref=q_ref_eff, v_meas=abs(v0))
    spec = IBR_SPECS[ctrl.dc_variant]
    u0 = np.array([i_dc0, v_ref_droop, -i_inj.real, -i_inj.imag])
    linz = linearize(spec, x0, u0, params)
    return Subsystem(
        name=dev.id,
        state_labels=tuple(f"{dev.id}:{s}" for s in STATE_NAMES),
        inputs=(ext(f"{dev.id}:i_dc"), ext(f"{dev.id}:v_ref"))
        + i_pair(dev.bus),
        outputs=v_pair(dev.bus),
        a=linz.a, b=linz.b, c=linz.c, d=linz.d,
        x0=x0, u0=u0, y0=linz.y0,
        spec_name=spec.name,
        params=tuple(params[n_] for n_ in PARAM_NAMES),
    )
