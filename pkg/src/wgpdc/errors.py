"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ``ConfigurationError`` -> 2,
``NumericalError`` -> 3.
"""


class ConfigurationError(ValueError):
    """Invalid physical or run configuration."""


class DomainError(ConfigurationError):
    """Argument outside the validity interval of a model."""


class NumericalError(RuntimeError):
    """Root bracketing, calibration or grid construction failed."""


class CalibrationError(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


class SupportError(NumericalError):
    """JSA grid could not be extended far enough to contain the support."""
