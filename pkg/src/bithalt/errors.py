"""Shared exception types."""


class BithaltError(Exception):
    """Base class for package errors."""


class InvalidDistributionError(BithaltError, ValueError):
    """Probability vector violates non-negativity or normalization."""


class InvalidInputError(BithaltError, ValueError):
    """Malformed numeric input (non-finite value, dimension mismatch, ...)."""


class ConfigError(BithaltError, ValueError):
    """Configuration value out of its legal range."""


class TraceParseError(BithaltError, ValueError):
    """A trace or scenario file failed to parse.

    Carries the path and (when known) the 1-based line number.
    """

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class UnsupportedSchemaError(TraceParseError):
    """File declares a schema version this build does not understand."""


class EmptyRunError(BithaltError, ValueError):
    """Aggregation requested over zero records."""


class GroupingError(BithaltError, ValueError):
    """Records with mixed method/budget fed to a single-group aggregate."""
