"""Exception hierarchy shared by every module."""


class AmputError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParamsError(AmputError, ValueError):
    """Raised for out-of-range model parameters or malformed grids."""


class NoConvergenceError(AmputError, RuntimeError):
    """Raised when the projected SOR iteration exceeds its budget."""


class DomainError(AmputError, ValueError):
    """Raised when an argument lies outside the region where a formula is valid."""


class PoleError(DomainError):
    """Raised when a formula is evaluated exactly at a pole."""


class DegenerateLevelError(AmputError, RuntimeError):
    """Raised when a time level carries no active node although theta > 0."""
