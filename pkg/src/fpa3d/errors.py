"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data and file
format problems exit 2, numeric failures exit 3.
"""


class FpaError(Exception):
    exit_code = 1


class ArgumentError(FpaError, ValueError):
    exit_code = 1


class ConfigError(ArgumentError):
    pass


class ShapeError(FpaError, ValueError):
    exit_code = 2


class SizeError(ShapeError):
    pass


class DegenerateBatchError(ShapeError):
    pass


class InfeasibleError(FpaError, ValueError):
    """CTC label cannot be emitted in the available number of frames."""
    exit_code = 2


class ContractError(FpaError, ValueError):
    exit_code = 2


class CorruptionError(FpaError, RuntimeError):
    exit_code = 2


class NumericError(FpaError, ArithmeticError):
    exit_code = 3


class FormatError(FpaError, IOError):
    exit_code = 2


class TruncationError(FormatError):
    pass


class VersionError(FormatError):
    pass
