"""Exception hierarchy shared by the solver modules and the CLI."""


class LFDError(Exception):
    """Base class for every error raised by this package."""


class DomainError(LFDError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ConfigError(LFDError):
    """Malformed or inconsistent run configuration (CLI exit code 2)."""


class SingularMatrixError(LFDError, ArithmeticError):
    """Zero pivot met during a banded LU factorization."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"matrix is singular: zero pivot in column {column}")


class NumericalAbort(LFDError):
    """The continuation diverged or hit a singular operator (CLI exit code 3)."""

    def __init__(self, message, harmonic=None, depth=None, mesh=None):
        self.harmonic = harmonic
        self.depth = depth
        self.mesh = mesh
        where = []
        if mesh is not None:
            where.append(f"mesh={mesh}")
        if harmonic is not None:
            where.append(f"m={harmonic}")
        if depth is not None:
            where.append(f"k={depth}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class StateError(LFDError):
    """Accumulator bookkeeping does not match the harmonic being computed."""


class GridFormatError(LFDError):
    """Base class for LFDG decoding failures."""


class BadMagicError(GridFormatError):
    pass


class UnsupportedVersionError(GridFormatError):
    pass


class TruncatedPayloadError(GridFormatError):
    pass


class NonFiniteDataError(GridFormatError):
    pass
