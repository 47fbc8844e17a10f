"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: validation problems exit
with 2, numerical failures with 3, infeasible optimization with 4.
"""


class StabmanError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(StabmanError):
    """Malformed or physically inconsistent input data."""


class NumericalError(StabmanError):
    """A numerical procedure failed to converge or produced garbage."""


class AlgebraicLoopError(NumericalError):
    """The interconnection has a singular algebraic constraint.

    Carries the names of the subsystems participating in the loop so the
    message points at the offending part of the network.
    """

    def __init__(self, subsystems):
        self.subsystems = tuple(subsystems)
        names = ", ".join(self.subsystems) if self.subsystems else "unknown"
        super().__init__(
            "algebraic loop or singular interconnection involving: " + names
        )


class InfeasibleError(StabmanError):
    """An optimization run finished without any feasible point."""
