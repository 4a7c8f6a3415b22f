"""Exception types shared across the package."""


class EgosocialError(Exception):
    """Base class for package-specific failures."""


class ConfigError(EgosocialError):
    """Invalid configuration. Collects every violated field, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid config: " + "; ".join(self.violations))


class MissingInputError(EgosocialError):
    """A required upstream artifact (dataset, checkpoint) is absent."""


class DatasetFormatError(EgosocialError):
    """Base class for dataset/checkpoint container parse failures."""


class HeaderError(DatasetFormatError):
    """Corrupt or incomplete text header."""


class DimensionMismatchError(DatasetFormatError):
    """Header dimensions are internally inconsistent or disagree with the payload stride."""


class TruncatedPayloadError(DatasetFormatError):
    """Payload is shorter than the header declares."""


class CheckpointHashError(DatasetFormatError):
    """Stored content hash does not match the payload."""


class CheckpointVersionError(DatasetFormatError):
    """Checkpoint format version is not supported by this code."""
