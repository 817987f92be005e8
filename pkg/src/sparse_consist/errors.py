"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Vector or matrix shapes are inconsistent with each other."""


class InnerProjectionError(RuntimeError):
    """The iterative coefficient-space projection failed to reach a usable
    primal residual within its iteration budget."""
