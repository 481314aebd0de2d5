"""Exception hierarchy. The CLI maps these classes onto exit codes."""


class FairmiError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(FairmiError):
    """Invalid configuration value or malformed config/schema file."""


class SchemaError(FairmiError):
    """Data does not match its feature schema."""


class EncodingError(SchemaError):
    """A cell value cannot be encoded under the schema."""


class ParseError(FairmiError):
    """Malformed CSV content."""


class InputError(FairmiError):
    """Inconsistent inputs to a metric (length mismatch, empty input)."""


class AuditError(FairmiError):
    """A fairness audit cannot be computed (no usable subgroups)."""


class NumericError(FairmiError):
    """A numeric precondition was violated."""


class TrainingError(FairmiError):
    """Training diverged or could not proceed."""


class IntegrityError(FairmiError):
    """A fetched file failed checksum verification."""


class NetworkError(FairmiError):
    """A download failed; retrying may succeed."""
