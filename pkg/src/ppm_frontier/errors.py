"""Exception hierarchy shared by every solver in the package."""


class FrontierError(Exception):
    """Base class for all package errors."""


class ValidationError(FrontierError, ValueError):
    """Input violates a documented precondition."""


class DimensionMismatch(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


class NonPositiveLambda(ValidationError):
    pass


class EpsilonTooLarge(ValidationError):
    def __init__(self, epsilon, min_n):
        self.epsilon = epsilon
        self.min_n = min_n
        super().__init__(
            f"epsilon={epsilon:.6g} >= 1; need n >= {min_n} at this m for the kappa scaling")


class SolverError(FrontierError, RuntimeError):
    """A numerical routine failed to deliver a certified answer."""


class MaxIterationsExceeded(SolverError):
    def __init__(self, message, x=None, residual=None):
        self.x = x
        self.residual = residual
        super().__init__(f"{message} (residual={residual})")


class InfeasibleDomain(SolverError):
    pass


class InfeasibleBudget(SolverError):
    pass


class InfeasibleAtBeta(SolverError):
    pass


class ZeroIterate(SolverError):
    pass


class NonFiniteGradient(SolverError):
    pass


class DivergenceDetected(SolverError):
    pass


class DegenerateCovariance(SolverError):
    pass


class DataError(FrontierError, ValueError):
    """Malformed input data file."""


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class NonMonotoneDates(DataError):
    pass


class TooFewRows(DataError):
    pass


class FileTooLarge(DataError):
    pass
