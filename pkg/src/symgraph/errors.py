"""Exception types shared across the package."""


class SymgraphError(Exception):
    """Base class for all package errors."""


class DimensionError(SymgraphError):
    """Tensor shapes are incompatible for the requested operation."""


class DomainError(SymgraphError):
    """An argument is outside the operation's domain (e.g. empty input)."""


class EmbeddingParseError(SymgraphError):
    """An embedding text file could not be parsed."""


class SchemaError(SymgraphError):
    """A structured document does not match its schema."""


class ValidationError(SymgraphError):
    """A graph failed structural validation."""


class TrainingError(SymgraphError):
    """Training aborted (non-finite loss or gradient)."""


class ConfigError(SymgraphError):
    """Invalid run configuration."""
