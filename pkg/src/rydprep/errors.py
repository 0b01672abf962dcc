"""Exception types raised by the simulation engine."""


class ArgumentError(ValueError):
    """Invalid argument (bad site index, dimension mismatch, ...)."""


class SolverError(RuntimeError):
    """A numerical solver failed to produce a usable result."""


class ConvergenceError(SolverError):
    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class EliminationError(SolverError):
    """Adiabatic elimination impossible: the excited manifold has a non-decaying state."""


class ResourceError(SolverError):
    """Problem too large for the requested method."""


class StepSizeError(SolverError):
    pass


class IntegratorError(SolverError):
    pass


class NumericalConsistencyError(SolverError):
    pass


class PositivityError(SolverError):
    """A fidelity or population fell outside [0, 1] beyond round-off."""
