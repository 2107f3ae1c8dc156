"""Exception types shared across the package, mapped to CLI exit codes."""


class SmutfError(Exception):
    """Base class for all package errors."""


class DataError(SmutfError):
    """Bad or missing input data: files, CSV structure, manifests, model files."""


class ProviderError(SmutfError):
    """Remote embedding or chat endpoint failed after retries."""


class SchemaVersionError(DataError):
    """Feature-schema hash of a model does not match the active configuration."""
