"""Dynamic subsystem models: passive elements, machines, converters.

All subsystems share the port contract defined in :mod:`subsystem`:
signals live in the synchronous XY frame on the system per-unit base, and
each bus has exactly one voltage-defining subsystem.
"""

from .subsystem import (
    Signal, Subsystem, KIND_V, KIND_I, KIND_EXT, ext, i_pair, v_pair,
)
from .lin import DynamicsSpec, linearize, eval_dynamics, eval_outputs
from .passive import (
    series_rl, bus_cap, rl_load, transformer_t, stiff_source,
)
from .sg import SG_SPEC, build_sg, init_sg
from .ibr import IBR_SPECS, build_ibr, init_ibr, ibr_param_vector

__all__ = [
    "Signal", "Subsystem", "KIND_V", "KIND_I", "KIND_EXT",
    "ext", "i_pair", "v_pair",
    "DynamicsSpec", "linearize", "eval_dynamics", "eval_outputs",
    "series_rl", "bus_cap", "rl_load", "transformer_t", "stiff_source",
    "SG_SPEC", "build_sg", "init_sg",
    "IBR_SPECS", "build_ibr", "init_ibr", "ibr_param_vector",
]
