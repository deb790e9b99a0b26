"""Exception hierarchy.

Two families: ``ValidationError`` for bad inputs (CLI exit code 1) and
``NumericalError`` for computations that cannot proceed (CLI exit code 2).
"""


class ValidationError(ValueError):
    """Inputs violate a documented precondition."""


class NumericalError(ArithmeticError):
    """A numerical computation cannot produce a meaningful result."""


class DimensionMismatchError(ValidationError):
    pass


class HypothesisViolation(ValidationError):
    """Signal lower bound (H.2) does not hold for the supplied constants."""

    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = tuple(offending)


class ConfigError(ValidationError):
    """Malformed experiment configuration."""

    def __init__(self, message, field=None, line=None):
        self.reason = message
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.field = field
        self.line = line


class RankDeficientError(NumericalError):
    pass


class ZeroSeedError(NumericalError):
    pass


class DegenerateMeasureError(NumericalError):
    pass


class IllConditionedMomentsError(NumericalError):
    def __init__(self, k, condition):
        super().__init__(
            f"ill-conditioned moments at k={k}: Hankel condition estimate {condition:.3e}"
        )
        self.k = k
        self.condition = condition


class CombinatorialCapError(NumericalError):
    def __init__(self, count, cap):
        super().__init__(f"combinatorial cap exceeded: {count} subsets > cap {cap}")
        self.count = count
        self.cap = cap
