"""Exception types raised across the package."""


class SpherollError(Exception):
    """Base class for every error raised by spheroll."""


class DegenerateInputError(SpherollError, ValueError):
    pass


class InvalidParamsError(SpherollError, ValueError):
    pass


class InvalidStateError(SpherollError, ValueError):
    pass


class SingularInertiaError(SpherollError, ArithmeticError):
    pass


class ContactViolationError(SpherollError):
    """The ground would have to pull on the shell, or friction is insufficient."""

    def __init__(self, message, t=None, report=None):
        super().__init__(message)
        self.t = t
        self.report = report


class NoConvergenceError(SpherollError, ArithmeticError):
    pass


class WrongBranchError(SpherollError):
    pass


class SweepError(SpherollError):
    """Raised after a sweep finishes with failed points.

    ``failures`` maps each failed grid value to its exception; ``partial``
    holds whatever did converge.
    """

    def __init__(self, failures, partial=None):
        listing = ", ".join(f"{k:.4g}: {v}" for k, v in failures.items())
        super().__init__(f"{len(failures)} sweep point(s) failed ({listing})")
        self.failures = failures
        self.partial = partial


class OutOfRangeError(SpherollError, ValueError):
    pass


class AmbiguousTrivialModeError(SpherollError):
    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = tuple(candidates)


class StalePoseError(SpherollError):
    pass


class InfeasibleSpeedError(SpherollError, ValueError):
    pass


class SchemaError(SpherollError, ValueError):
    """Config or result file does not match the expected schema."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line
