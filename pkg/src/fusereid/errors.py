"""Exception types shared across the package."""


class InputError(ValueError):
    """An input (array shape, label range, filename, ...) was rejected."""


class ConfigError(ValueError):
    """A configuration value violates its contract."""
