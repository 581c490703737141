class SeqfsError(Exception):
    """Base class for errors raised by this package."""


class DataError(SeqfsError, ValueError):
    """Input data violates a precondition (bad file, bad shape, bad labels)."""


class ConfigError(SeqfsError, ValueError):
    """Invalid hyperparameter or configuration value."""
