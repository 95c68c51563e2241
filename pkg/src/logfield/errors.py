"""Exception types raised across the package."""


class LogFieldError(Exception):
    """Base class for every error raised by logfield."""


class NonConvergence(LogFieldError):
    """A numerical procedure exhausted its budget before meeting tolerance."""


class TailBoundViolation(LogFieldError):
    """An integrand decays more slowly than its declared tail bound."""


class DomainError(LogFieldError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class NotPSD(LogFieldError):
    """A covariance matrix could not be factorized even after jitter."""


class DegenerateModulus(LogFieldError):
    """A modulus of continuity vanishes at a separation being tested."""


class DisconnectedGraph(LogFieldError):
    pass


class RankDeficiency(LogFieldError):
    pass


class SingularSystem(LogFieldError):
    pass


class ParseError(LogFieldError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
