"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to, and an
optional ``stage`` tag that the comparison harness fills in when a failure
propagates out of one of its pipeline stages.
"""


class BatteryLifeError(Exception):
    exit_code = 1
    stage = None


class ConfigError(BatteryLifeError, ValueError):
    exit_code = 2


class DataError(BatteryLifeError, ValueError):
    exit_code = 3


class NumericalError(BatteryLifeError, ArithmeticError):
    exit_code = 4


class IoError(BatteryLifeError, OSError):
    exit_code = 5


# configuration
class InvalidConfig(ConfigError):
    pass


class KOutOfRange(ConfigError):
    pass


# telemetry
class MissingColumn(DataError):
    pass


class EmptyFile(DataError):
    pass


class ColumnCountMismatch(DataError):
    pass


class AllRowsDropped(DataError):
    pass


# features / decomposition
class EmptySeries(DataError):
    pass


class ZeroVarianceColumn(DataError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"column {column!r} has zero variance")


class TooFewRows(DataError):
    pass


class SchemaMismatch(DataError):
    pass


# models
class NoValidSplit(DataError):
    pass


class InsufficientData(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NonFiniteLoss(NumericalError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


# evaluation
class UnknownExperiment(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass
