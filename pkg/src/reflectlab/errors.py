"""Exception hierarchy shared by every module."""


class ReflectLabError(Exception):
    pass


# geometry
class PointOutsideDomain(ReflectLabError, ValueError):
    pass


class StencilExitsDomain(ReflectLabError, ValueError):
    pass


class NotAComplexSpace(ReflectLabError, TypeError):
    pass


class NoMetricAvailable(ReflectLabError, TypeError):
    pass


# involutions / registry
class IndexOutOfRange(ReflectLabError, IndexError):
    pass


class InvalidQ(ReflectLabError, ValueError):
    pass


class UnsupportedSpace(ReflectLabError, TypeError):
    pass


class UnknownType(ReflectLabError, KeyError):
    pass


class InvalidParams(ReflectLabError, ValueError):
    pass


# chains
class InvalidFamily(ReflectLabError, ValueError):
    pass


class NTooSmall(ReflectLabError, ValueError):
    pass


# solver
class ValueLeftTargetDomain(ReflectLabError, ValueError):
    pass


class InsufficientStencil(ReflectLabError, ValueError):
    pass


class NonConvergence(ReflectLabError, RuntimeError):
    """Raised when a solve stops before the tension drops below tolerance.

    The last iterate and its residual ride along for diagnosis.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# harness
class SigmaLeavesDomain(ReflectLabError, ValueError):
    pass


class FixedSetValueMismatch(ReflectLabError, ValueError):
    pass


class HypothesisViolated(ReflectLabError, ValueError):
    pass


class AllSamplesNearPoles(ReflectLabError, ValueError):
    pass


class LineNotOnSurface(ReflectLabError, ValueError):
    pass


# cli
class ConfigParseError(ReflectLabError, ValueError):
    pass


class ExperimentError(ReflectLabError, RuntimeError):
    pass
