"""Exception hierarchy.

Every error derives from :class:`StylizedFactsError`. The three intermediate
classes map onto the CLI exit codes: configuration problems (2), data
problems (3) and numerical failures (4).
"""


class StylizedFactsError(Exception):
    exit_code = 1


class ConfigError(StylizedFactsError):
    exit_code = 2


class DataError(StylizedFactsError):
    exit_code = 3


class NumericalError(StylizedFactsError):
    exit_code = 4


class ConfigInvalid(ConfigError):
    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class InvalidParameters(ConfigError):
    pass


class ParseError(DataError):
    def __init__(self, row, column, detail=""):
        self.row = row
        self.column = column
        msg = f"cannot parse row {row}, column {column!r}"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class NonMonotonicTimestamps(DataError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"timestamp at row {row} is not strictly increasing")


class NonPositivePrice(DataError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"non-positive price at row {row}")


class SeriesTooShort(DataError):
    pass


class ZeroVariance(SeriesTooShort):
    """A constant series: no scale can be estimated from it."""


class MissingVolume(DataError):
    pass


class InsufficientTailData(DataError):
    pass


class InsufficientData(DataError):
    pass


class InsufficientRange(DataError):
    pass


class CheckpointOutOfRange(DataError):
    pass


class NonPositiveMeanReturn(DataError):
    def __init__(self, tau):
        self.tau = tau
        super().__init__(f"mean return at tau={tau} is not strictly positive")


class NoOnsets(DataError):
    pass


class NonPositiveCorrelationInRange(DataError):
    pass


class DegenerateRegression(NumericalError):
    pass


class DegenerateAbscissae(DegenerateRegression):
    pass


class LengthMismatch(DataError):
    pass


class NotPowerOfTwo(NumericalError):
    pass


class SingularNormalEquations(NumericalError):
    pass


class NonFiniteResidual(NumericalError):
    pass


class OptimizerDidNotConverge(NumericalError):
    def __init__(self, iterations, last_objective, detail=""):
        self.iterations = iterations
        self.last_objective = last_objective
        msg = f"optimizer stopped after {iterations} iterations (objective {last_objective:.6g})"
        super().__init__(f"{msg}: {detail}" if detail else msg)
