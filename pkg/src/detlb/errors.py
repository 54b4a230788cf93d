"""Exception hierarchy shared by all detlb modules."""


class DetlbError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(DetlbError, ValueError):
    pass


class GenerationFailure(DetlbError, RuntimeError):
    pass


class DisconnectedGraph(DetlbError, ValueError):
    pass


class NoSteadyState(DetlbError, ValueError):
    pass


class NumericFailure(DetlbError, RuntimeError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class InfeasibleBalancer(DetlbError, ValueError):
    pass


class NegativeFlow(InfeasibleBalancer):
    pass


class LedgerCorruption(DetlbError, RuntimeError):
    pass


class PreconditionError(DetlbError, ValueError):
    pass


class DiagnosticsFailure(DetlbError, RuntimeError):
    pass


class ConfigError(DetlbError, ValueError):
    pass
