"""Exception types raised across the package."""


class WeakFieldError(ValueError):
    """Parameters fall outside the weak-field or small-cavity regime."""


class MetricDegeneracyError(ValueError):
    """The metric signature breaks down (g00 >= 0)."""


class OutOfRangeError(ValueError):
    """A coordinate or time lies outside the domain where a quantity is defined."""


class AiryBranchError(ValueError):
    """The large-argument Airy phase form is not valid for the requested mode."""


class ConvergenceError(RuntimeError):
    """A root-find, quadrature or integration failed to meet its tolerance."""
