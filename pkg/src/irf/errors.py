"""Exception types shared across the package."""


class IrfError(Exception):
    """Base class for errors raised by this package."""


class DataError(IrfError, ValueError):
    """Input data is missing, malformed or inconsistent."""


class ComputeError(IrfError, ValueError):
    """A computation was asked for outside its valid range."""
