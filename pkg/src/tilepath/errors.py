"""Exception hierarchy shared by every tilepath module."""


class TilepathError(Exception):
    """Base class for all errors raised by tilepath."""


class DimensionError(TilepathError, ValueError):
    """Operand shapes do not conform."""


class EvaluationError(TilepathError, ArithmeticError):
    """A function produced a non-finite value."""


class DegenerateTransformError(TilepathError, ValueError):
    """An affine transform is singular or its parameters are illegal."""


class IngestError(TilepathError, ValueError):
    """Raw pixel data is outside the accepted range."""


class ConfigurationError(TilepathError, ValueError):
    pass


class DataError(TilepathError, ValueError):
    pass


class GeometryError(TilepathError, ValueError):
    pass


class FormatError(TilepathError, ValueError):
    """A weight file does not match the architecture it declares."""


class CorruptionError(FormatError):
    """A file ended early or carries a bad magic."""


class StateError(TilepathError, RuntimeError):
    pass


class UndefinedRateError(TilepathError, ValueError):
    """A rate (TPR, FPR, ...) needs both classes present."""
