"""Exception taxonomy shared by all modules."""


class ScosepError(Exception):
    """Base class for package errors."""


class DimensionError(ScosepError, ValueError):
    """Operand shapes or lengths do not match."""


class ParameterError(ScosepError, ValueError):
    """A parameter is outside its documented range."""


class CapacityError(ScosepError, ValueError):
    """Requested size exceeds the desk-scale memory guard."""


class ConfigurationError(ScosepError, ValueError):
    """A required piece of configuration is missing or inconsistent."""


class DataExhaustedError(ScosepError, ValueError):
    """An optimizer asked for more samples than the dataset holds."""
