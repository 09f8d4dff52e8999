class LogoMRError(Exception):
    pass


class ContractError(LogoMRError, ValueError):
    pass


class ShapeError(ContractError):
    pass


class UninformativeSampleError(ContractError):
    pass


class NumericError(LogoMRError, ArithmeticError):
    pass


class ConfigError(LogoMRError):
    pass


class FormatError(LogoMRError):
    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (at byte offset {offset})")
        self.offset = offset


class TrainingError(LogoMRError):
    pass


class UndefinedMetricError(LogoMRError):
    pass


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_TRAINING = 4
EXIT_UNDEFINED_METRIC = 5

# checked in order, first match wins
EXIT_CODES: list[tuple[type[BaseException], int]] = [
    (ConfigError, EXIT_CONFIG),
    (FormatError, EXIT_IO),
    (OSError, EXIT_IO),
    (TrainingError, EXIT_TRAINING),
    (UndefinedMetricError, EXIT_UNDEFINED_METRIC),
]


def exit_code_for(error: BaseException) -> int | None:
    for error_type, code in EXIT_CODES:
        if isinstance(error, error_type):
            return code
    return None
