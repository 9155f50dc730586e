"""Exception hierarchy shared across the package."""


class TCLError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(TCLError, ValueError):
    pass


class InconsistentBasisError(TCLError, ValueError):
    pass


class ExpansionError(TCLError, ValueError):
    """Raised when an operator cannot be expanded on the basis."""

    def __init__(self, message, residue=None):
        super().__init__(message)
        self.residue = residue


class ModelError(TCLError, ValueError):
    pass


class DimensionMismatchError(TCLError, ValueError):
    pass


class NumericalAbort(TCLError, FloatingPointError):
    """Non-finite objective or gradient during identification."""


class ConfigError(TCLError, ValueError):
    pass
