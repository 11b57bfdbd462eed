from enum import IntEnum


class ExitCode(IntEnum):
    CONVERGED = 0
    MAX_ITERS = 2
    DIVERGED = 3
    IO = 4
    CONFIG = 5


class DriftDecompError(Exception):
    """Base class for all errors raised by driftdecomp."""
    exit_code = ExitCode.CONFIG


class DimensionError(DriftDecompError):
    exit_code = ExitCode.CONFIG


class ConfigError(DriftDecompError):
    exit_code = ExitCode.CONFIG


class UndefinedInputError(DriftDecompError):
    exit_code = ExitCode.CONFIG


class SingularSystemError(DriftDecompError):
    """A regularized or Hadamard-Gram system is numerically singular."""
    exit_code = ExitCode.DIVERGED

    def __init__(self, message, condition=None, index=None):
        super().__init__(message)
        self.condition = condition
        self.index = index


class NotPSDError(DriftDecompError):
    exit_code = ExitCode.DIVERGED


class DivergenceError(DriftDecompError):
    exit_code = ExitCode.DIVERGED

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class AllStartsDivergedError(DriftDecompError):
    exit_code = ExitCode.DIVERGED

    def __init__(self, message, starts=None):
        super().__init__(message)
        self.starts = list(starts or [])


class ParseError(DriftDecompError):
    """Malformed DTF header or payload; offset is the byte position of the problem."""
    exit_code = ExitCode.IO

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f'{message} (at byte {offset})'
        super().__init__(message)
        self.offset = offset


class ModelNotFoundError(DriftDecompError):
    exit_code = ExitCode.IO


class MissingInputError(DriftDecompError):
    exit_code = ExitCode.IO
