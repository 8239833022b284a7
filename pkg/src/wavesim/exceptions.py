"""Exception types shared across wavesim.

Each class maps onto one CLI exit code (see ``wavesim.cli``).
"""


class WavesimError(Exception):
    """Base class for all wavesim errors."""


class ConfigError(WavesimError, ValueError):
    """Invalid configuration, geometry or grid resolution."""


class DomainError(WavesimError, ValueError):
    """An argument lies outside the domain where a function is defined."""


class SolverError(WavesimError, ArithmeticError):
    """A factorization or sparse solve failed.

    ``pivot`` is the index of the first non-positive pivot when the failure
    comes from a Cholesky factorization, otherwise ``None``.
    """

    def __init__(self, message, pivot=None, epoch=None):
        super().__init__(message)
        self.pivot = pivot
        self.epoch = epoch


class FormatError(WavesimError, OSError):
    """A binary file does not conform to its declared layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
