"""Exception types shared across the package."""


class WkamError(Exception):
    """Base class for all package errors."""


class InvalidInputError(WkamError, ValueError):
    pass


class ConfigurationError(WkamError, ValueError):
    """Raised for inconsistent numerical settings (e.g. a velocity cap below one cell)."""


class InvalidStateError(WkamError, RuntimeError):
    pass


class TonelliViolation(WkamError, ArithmeticError):
    pass


class LegendreError(WkamError, ArithmeticError):
    """Numeric Legendre transform did not converge; ``best`` carries the best value found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DivergenceError(WkamError, RuntimeError):
    """Iterates left the band allowed by the critical-value normalisation."""


class NondifferentiablePoint(WkamError, ValueError):
    pass


class InternalError(WkamError, RuntimeError):
    pass
