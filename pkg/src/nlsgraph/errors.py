"""Exception hierarchy shared by all nlsgraph modules."""

from __future__ import annotations


class NLSGraphError(Exception):
    """Base class for library errors."""


class DomainError(NLSGraphError, ValueError):
    pass


class ShapeError(NLSGraphError, ValueError):
    pass


class FrequencyError(NLSGraphError, ValueError):
    """Frequency at or below the branch threshold."""


class BranchError(NLSGraphError, ValueError):
    """Bump count not admissible for the given parameters."""


class ConstraintError(NLSGraphError, ValueError):
    pass


class UnsupportedError(NLSGraphError, NotImplementedError):
    pass


class NoSolutionError(NLSGraphError, ValueError):
    def __init__(self, message: str, minimum_mass: float):
        super().__init__(message)
        self.minimum_mass = minimum_mass


class ResolutionError(NLSGraphError, ValueError):
    pass


class StepSizeError(NLSGraphError, ValueError):
    pass


class SolverError(NLSGraphError, RuntimeError):
    def __init__(self, message: str, iterations: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class StepError(NLSGraphError, RuntimeError):
    pass


class BlowUpError(NLSGraphError, RuntimeError):
    """Discrete H1 norm crossed the blow-up threshold.

    ``trajectory`` holds everything recorded before the signal when raised
    from :func:`nlsgraph.evolution.evolve`.
    """

    def __init__(self, t: float, h1_norm: float, trajectory=None):
        super().__init__(f"blow-up signal at t={t:.6g}: H1 norm {h1_norm:.6g}")
        self.t = t
        self.h1_norm = h1_norm
        self.trajectory = trajectory


class SetupError(NLSGraphError, ValueError):
    pass
