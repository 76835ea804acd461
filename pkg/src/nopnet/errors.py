"""Exception hierarchy shared across the package."""


class NopNetError(Exception):
    """Base class for package errors."""


class InputError(NopNetError):
    """Malformed data fed to an operation (bad ids, shape mismatch, empty input)."""


class ConfigError(NopNetError):
    """Invalid configuration value or combination."""


class TrainingError(NopNetError):
    """Numeric failure during training (non-finite loss or gradient)."""


class ContractError(NopNetError):
    """Caller violated an API contract (e.g. chose a masked action)."""


class SampleExcludedError(NopNetError):
    """Sample cannot start an episode (no valid insertion position)."""


class MissingArtifactError(NopNetError):
    """A required on-disk artifact (corpus, checkpoint) is absent."""
