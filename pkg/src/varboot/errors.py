"""Exception hierarchy.

``MathError`` subclasses signal a mathematical obstruction (exit code 2 in the
CLI); ``UsageError`` subclasses signal bad input (exit code 1).
"""


class VarbootError(Exception):
    pass


class MathError(VarbootError):
    pass


class UsageError(VarbootError):
    pass


class UnknownAtomDerivative(MathError):
    pass


class MissingWeight(MathError):
    pass


class DivergentHomotopy(MathError):
    pass


class NonLaurentIntegrand(MathError):
    pass


class OrderTooHigh(MathError):
    pass


class RankUnstable(MathError):
    pass


class DimensionMismatch(UsageError):
    pass


class DegreeMismatch(UsageError):
    pass


class ParseError(UsageError):
    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class IndexArityError(UsageError):
    pass


class UnboundIdentifier(UsageError):
    pass
