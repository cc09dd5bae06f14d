"""Exception hierarchy shared by every geofuzz module."""


class GeoFuzzError(Exception):
    """Base class for all errors raised by geofuzz."""


class ParameterError(GeoFuzzError, ValueError):
    """Invalid configuration or argument values."""


class InputError(GeoFuzzError, ValueError):
    """An input vector does not fit the program it is fed to."""


class StructuralError(GeoFuzzError):
    """A graph lacks a structural property an operation depends on."""


class NumericalError(GeoFuzzError, ArithmeticError):
    """A linear solve or related numerical step failed."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class StateError(GeoFuzzError, RuntimeError):
    """An operation was called on state that cannot support it."""


class DataError(GeoFuzzError):
    """Recorded results are internally inconsistent."""
