class GTVRError(Exception):
    """Root of every error raised by the gtvr package."""


class InvalidSizeError(GTVRError, ValueError):
    pass


class TopologyError(GTVRError, ValueError):
    pass


class WeightError(GTVRError, ValueError):
    def __init__(self, message: str, node: int = None):
        super().__init__(message)
        self.node = node


class PreconditionError(GTVRError, ValueError):
    pass


class SpectralError(GTVRError, RuntimeError):
    pass


class DataError(GTVRError, ValueError):
    """Dataset contents that cannot be used as given."""


class ParseError(DataError):
    def __init__(self, message: str, line_number: int = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DimensionError(GTVRError, ValueError):
    pass


class NormalizationError(DataError):
    def __init__(self, message: str, index: int = None):
        super().__init__(message)
        self.index = index


class PartitionError(DataError):
    pass


class LabelError(DataError):
    pass


class AssumptionError(GTVRError, ValueError):
    pass


class StrongConvexityError(AssumptionError):
    pass


class ConfigError(GTVRError, ValueError):
    def __init__(self, message: str, field: str = None):
        if field is not None and field not in message:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class DivergenceError(GTVRError, RuntimeError):
    """Raised when an iterate stops being finite.

    Carries the trace recorded so far; its last record describes the last finite iteration.
    """

    def __init__(self, message: str, trace=None, last_finite_iteration: int = None):
        super().__init__(message)
        self.trace = trace
        self.last_finite_iteration = last_finite_iteration


class OracleError(GTVRError, RuntimeError):
    pass


class MetricError(GTVRError, ValueError):
    pass


class PlotError(GTVRError, ValueError):
    pass
