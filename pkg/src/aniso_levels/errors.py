"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration / potential description."""


class ZeroMeanError(RuntimeError):
    """The angular mean of the anisotropic remainder is not zero within tolerance."""

    def __init__(self, message, worst_radius, residual):
        super().__init__(message)
        self.worst_radius = worst_radius
        self.residual = residual


class ConvergenceError(RuntimeError):
    """Iterative eigensolver did not reach the requested residual."""

    def __init__(self, message, residuals=None, partial=None):
        super().__init__(message)
        self.residuals = residuals
        self.partial = partial
