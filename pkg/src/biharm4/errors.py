"""Exception types shared across the package."""


class Biharm4Error(Exception):
    """Base class for all package errors."""


class ParameterError(Biharm4Error, ValueError):
    """Invalid argument value (grid size, dilation rate, exponent, ...)."""


class ConfigError(Biharm4Error):
    """Malformed or incomplete run configuration."""


class AdmissibilityError(Biharm4Error):
    """A potential violates one of the standing admissibility assumptions."""


class InfeasibilityError(Biharm4Error):
    """No seed could enter the feasible set of the constrained problem."""


class ConvergenceError(Biharm4Error):
    """Optimization exhausted its budget; carries the best attempt found."""

    def __init__(self, message, best_result=None):
        super().__init__(message)
        self.best_result = best_result


class DegenerateMinimizerError(Biharm4Error):
    """Multiplier extraction failed (nonpositive value or vanishing pairing)."""


class NormalizationError(Biharm4Error):
    """Input field does not satisfy the required unit L2 normalization."""


class DegenerateInputError(Biharm4Error):
    """Operation is undefined for the zero field."""


class NotAnExtremizerError(Biharm4Error):
    """Field does not satisfy the equality case within tolerance."""


class DependencyError(Biharm4Error):
    """A required upstream artifact (e.g. a solved constant) is missing."""
