"""Exception hierarchy shared by all modules."""


class HybridError(Exception):
    """Base class for errors raised by this package."""


class InputError(HybridError, ValueError):
    """Malformed arguments: wrong dimensions, mismatched objects, bad files."""


class ModelViolation(HybridError):
    """A run left the model's admissible set (left the domain, jumped outside D)."""


class AssumptionViolation(HybridError):
    """A standing assumption needed by the requested computation does not hold."""


class ConfigurationError(HybridError, ValueError):
    """Discretization parameters incompatible with the system."""


class ZenoError(ModelViolation):
    """Too many events closer together than the minimum dwell time."""
