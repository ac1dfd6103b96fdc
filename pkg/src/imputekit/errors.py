"""Exception types shared across the package."""


class ImputekitError(Exception):
    """Base class for all errors raised by imputekit."""


class ParseError(ImputekitError):
    """Malformed input file (ragged rows, bad header, unreadable tokens)."""


class IngestionError(ImputekitError):
    """Structurally invalid dataset (fully missing column, bad level, ...)."""


class ConfigError(ImputekitError):
    """Invalid configuration or unusable method/parameter combination."""


class FitError(ImputekitError):
    """A conditional model could not be fitted."""


class EstimatorError(ImputekitError):
    """An estimator failed on a completed dataset."""
