class CatkitError(Exception):
    """Base exception for all catkit errors."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InvalidArgumentError(CatkitError):
    """An argument is outside the domain of an operation."""


class ShapeError(CatkitError):
    """Tensor or array dimensions do not agree."""


class ConfigError(CatkitError):
    """A configuration value violates its contract."""


class DataError(CatkitError):
    """Input data is unusable (empty, non-finite, malformed)."""


class TooShortError(DataError):
    """Signal is shorter than one analysis window."""


class LabelError(DataError):
    """A class index is outside the known classes."""


class ManifestError(DataError):
    """A manifest row breaks the dataset invariants."""


class AudioFormatError(DataError):
    """Audio file is not 16 kHz mono PCM16 RIFF/WAVE."""


class CheckpointError(CatkitError):
    """Checkpoint file is corrupt or incompatible."""
