"""Exception hierarchy shared across the package."""


class TruncScoreError(Exception):
    """Base class for all package errors."""


class DomainError(TruncScoreError, ValueError):
    pass


class NotPositiveDefinite(TruncScoreError, ValueError):
    pass


class Degenerate(TruncScoreError, ValueError):
    pass


class BracketError(TruncScoreError, ValueError):
    pass


class NonConvergence(TruncScoreError, RuntimeError):
    """Iterative routine stopped before meeting its tolerance.

    The last iterate and residual are attached when available.
    """

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual


class ParseError(TruncScoreError, ValueError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class SchemaError(TruncScoreError, ValueError):
    pass


class ValidationError(TruncScoreError, ValueError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class InsufficientData(TruncScoreError, ValueError):
    pass


class RankDeficient(TruncScoreError, ValueError):
    pass


class Separation(TruncScoreError, RuntimeError):
    pass


class NoEvents(TruncScoreError, ValueError):
    pass


class SingularInformation(TruncScoreError, RuntimeError):
    pass


class EmptyArm(TruncScoreError, ValueError):
    pass


class PositivityViolation(TruncScoreError, ValueError):
    pass


class CensoringPositivityViolation(PositivityViolation):
    pass


class DegenerateCovariance(TruncScoreError, ValueError):
    pass
