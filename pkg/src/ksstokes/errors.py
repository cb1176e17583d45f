"""Exception hierarchy shared by the solver modules."""


class KSSError(Exception):
    """Base class; ``substep`` is filled in by ``advance`` when a sub-step fails."""

    substep = None


class InvalidParameter(KSSError, ValueError):
    pass


class DomainError(KSSError, ValueError):
    pass


class SolverFailure(KSSError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class PositivityViolation(KSSError):
    def __init__(self, message, field=None, min_value=None):
        super().__init__(message)
        self.field = field
        self.min_value = min_value


class TimeStepCollapse(KSSError):
    def __init__(self, message, dt=None, t=None):
        super().__init__(message)
        self.dt = dt
        self.t = t


class StabilityViolation(KSSError, ValueError):
    pass


class InsufficientData(KSSError, ValueError):
    pass


class ConfigError(KSSError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class MalformedCase(KSSError, ValueError):
    """An ODE test problem that does not satisfy the lemma's hypotheses."""


class LemmaViolation(KSSError, AssertionError):
    pass
