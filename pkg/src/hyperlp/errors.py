"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DataFormatError(ValueError):
    """A data file does not match its binary format."""


class DataConsistencyError(ValueError):
    """A data file is self-inconsistent (e.g. image/label count mismatch)."""


class DataIOError(OSError):
    """A data file is truncated or unreadable."""


class SizeError(ValueError):
    """A size request cannot be met (empty set, split overdraw)."""


class DomainError(ValueError):
    """A numeric argument is outside its mathematical domain."""


class TrainingError(RuntimeError):
    """Training diverged; the message carries diagnostics."""


class ScaleError(RuntimeError):
    """A computation would exceed its configured scale limit."""


class ConfigError(ValueError):
    """A run configuration is invalid."""
