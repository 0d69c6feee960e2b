"""Exception types shared across the library."""


class DimensionError(ValueError):
    """Tensor extents incompatible with the requested operation."""


class ConfigError(ValueError):
    """Invalid architecture or run configuration."""


class ContractError(RuntimeError):
    """An operation was called outside its documented contract."""


class NumericError(ArithmeticError):
    """Non-finite values where finite ones are required."""


class FormatError(ValueError):
    """Malformed dataset or checkpoint file."""


class DataError(ValueError):
    """Invalid data content (e.g. out-of-range labels)."""
