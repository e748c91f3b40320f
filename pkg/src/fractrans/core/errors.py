"""Exceptions raised by fractrans solvers and tools."""


class FractransError(RuntimeError):
    """Base class of every error raised on purpose by this package."""


class InvalidProblem(FractransError):
    """A problem, constraint set or configuration violates its structural invariants."""


class DegenerateDenominator(FractransError):
    """A ratio denominator (or a quantity a transform divides by) fell below the degeneracy threshold."""


class DomainError(FractransError):
    """An argument lies outside the domain of the function being evaluated."""


class InnerSolverFailure(FractransError):
    """The inner convex step could not produce a usable point."""


class MaxItersError(InnerSolverFailure):
    """An iterative routine asked to be strict ran out of iterations."""


class SingularDenominator(FractransError):
    """A matrix denominator is not positive definite."""


class ShapeMismatch(FractransError):
    """Array shapes passed to a matrix routine are inconsistent."""


class UnsupportedSet(FractransError):
    """No projection or inner solver exists for the requested constraint set."""


ProjectionError = UnsupportedSet


class BudgetExceeded(FractransError):
    """A brute-force oracle was asked to search a space larger than its budget."""


class NotSeparable(FractransError):
    """Labeled points admit no separating hyperplane with positive margin."""


class BadTopology(FractransError):
    """Network generation parameters describe an impossible layout."""


class ConfigError(FractransError):
    """The benchmark configuration is missing fields or holds values of the wrong type."""


class ArtifactError(FractransError):
    """An output artifact could not be written or read back."""
