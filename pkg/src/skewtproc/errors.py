"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter is outside its valid domain."""


class ShapeError(ValueError):
    """An array argument has an incompatible shape."""


class BasisError(ParameterError):
    """The spline basis request is ill posed (more functions than times)."""


class FactorizationError(RuntimeError):
    """A covariance factor could not be Cholesky-factorized even with jitter.

    Attributes
    ----------
    factor : str
        Name of the offending factor ("spatial", "index", "spline", ...).
    """

    def __init__(self, factor, message=None):
        self.factor = factor
        super().__init__(message or f"Cholesky factorization failed for the {factor} factor")


class DataError(ValueError):
    """Input data violates the expected layout (missing cells, duplicates, parse)."""


class ConfigError(ValueError):
    """A run configuration is missing keys or holds invalid values."""
