"""Exception hierarchy shared by every ecomp module."""


class EcompError(Exception):
    """Base class for domain errors raised by ecomp."""


class ParamSpaceViolation(EcompError, ValueError):
    """Parameters fall outside the space where the normalizing series converges."""


class TruncationFailure(EcompError, RuntimeError):
    """The series tail bound could not be met before the hard term cap."""


class TailDominates(EcompError, RuntimeError):
    """A moment's truncation bound exceeds the requested tolerance."""


class MismatchedParams(EcompError, ValueError):
    pass


class ZeroEvent(EcompError, ValueError):
    pass


class DegenerateConditional(EcompError, ValueError):
    pass


class UnboundedTestFunction(EcompError, ValueError):
    pass


class DegenerateNu(EcompError, ValueError):
    pass


class DegenerateDistribution(EcompError, ValueError):
    """The law is a point mass at zero, so no compound Poisson rate exists."""


class ZeroAtOrigin(EcompError, ValueError):
    pass


class SupportViolation(EcompError, ValueError):
    pass


class NoImprovement(EcompError, RuntimeError):
    pass


class ParseError(EcompError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyData(EcompError, ValueError):
    pass
