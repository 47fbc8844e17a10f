"""stabman: small-signal stability manifolds and controller tuning for
converter-dominated power systems.

Workflow: describe a network (:mod:`stabman.netmodel`), assemble its
small-signal model around a solved operating point
(:mod:`stabman.assembler`), screen stability across scenarios
(:mod:`stabman.stability`), learn the stability boundary in controller
parameter space (:mod:`stabman.asm`, :mod:`stabman.classifier`), and tune
gains against it (:mod:`stabman.tuner`).
"""

from .errors import (
    AlgebraicLoopError, InfeasibleError, NumericalError, StabmanError,
    ValidationError,
)
from .netmodel import (
    AvrParams, Branch, Bus, Device, Dispatch, GovernorParams,
    IbrControlParams, IbrPhysicalParams, NetworkModel, Scenario, ScenarioSet,
    SgParams, SynthesisSpec, TheveninParams, aggregate_ibr, load_network,
    load_scenarios, nominal_scenario, save_network, save_scenarios,
    synthesize_scenarios, thevenin_reduce, validate_network,
)
from .powerflow import PowerFlowSolution, solve_power_flow
from .assembler import (
    AssembledSystem, assemble, assemble_prepared, equilibrium_residual,
    interconnect, prepare_case,
)
from .stability import (
    CaseContext, Spectrum, StabilityVerdict, angle_state_mask, eigenvalues,
    is_ps_stable, pssa,
)

__version__ = "0.1.0"

__all__ = [
    "AlgebraicLoopError", "InfeasibleError", "NumericalError",
    "StabmanError", "ValidationError",
    "AvrParams", "Branch", "Bus", "Device", "Dispatch", "GovernorParams",
    "IbrControlParams", "IbrPhysicalParams", "NetworkModel", "Scenario",
    "ScenarioSet", "SgParams", "SynthesisSpec", "TheveninParams",
    "aggregate_ibr", "load_network", "load_scenarios", "nominal_scenario",
    "save_network", "save_scenarios", "synthesize_scenarios",
    "thevenin_reduce", "validate_network",
    "PowerFlowSolution", "solve_power_flow",
    "AssembledSystem", "assemble", "assemble_prepared",
    "equilibrium_residual", "interconnect", "prepare_case",
    "CaseContext", "Spectrum", "StabilityVerdict", "angle_state_mask",
    "eigenvalues", "is_ps_stable", "pssa",
    "__version__",
]
