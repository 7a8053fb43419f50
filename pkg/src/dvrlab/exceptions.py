"""Exception types shared across the package."""


class DvrLabError(Exception):
    """Base class for all package errors."""


class ValidationError(DvrLabError):
    """Invalid argument or configuration value."""


class ConstructionError(DvrLabError):
    """An object could not be built (e.g. no connected graph within the retry budget)."""


class DivergenceError(DvrLabError):
    """Non-finite values appeared in an iterate."""

    def __init__(self, message, iteration=None, update_kind=None):
        super().__init__(message)
        self.iteration = iteration
        self.update_kind = update_kind


class InfeasibleDualError(DvrLabError):
    """A dual argument left the support of a conjugate function."""


class UnsupportedLossError(DvrLabError):
    """Operation requires a loss with a closed-form conjugate."""
