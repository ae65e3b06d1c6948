"""Exception hierarchy shared by all weakkam modules."""


class WeakKamError(Exception):
    """Base class for all errors raised by this package."""


class InputError(WeakKamError, ValueError):
    """Bad arguments: dimension mismatches, out-of-range parameters."""


class ConfigError(WeakKamError, ValueError):
    """Invalid run configuration (unknown keys, unsatisfiable grid, ...)."""


class NumericError(WeakKamError, RuntimeError):
    """A numerical procedure failed to converge or produced garbage."""
