"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems are usage
errors, audio/file problems are data errors, and the degenerate-* family
signals numerically ill-posed inputs.
"""


class VowelselError(Exception):
    """Base class for package-specific errors."""


class AudioFormatError(VowelselError):
    """File is not a well-formed RIFF/WAVE container."""


class UnsupportedFormatError(VowelselError):
    """WAV file uses a codec other than integer or float PCM."""


class EmptyAudioError(VowelselError):
    """WAV data chunk contains no samples."""


class TooShortError(VowelselError):
    """Clip is shorter than a single analysis frame."""


class ConfigurationError(VowelselError):
    """Invalid configuration value (frame/hop/filterbank/training setup)."""


class DegenerateClassError(VowelselError):
    """A class has too few observations for the requested statistic or split."""


class ConcentratedFeatureError(VowelselError):
    """Every class has zero within-class variance for some coefficient.

    Raised instead of returning an infinite Fisher's ratio, which would
    silently poison the ranking.
    """


class DegenerateDataError(VowelselError):
    """Training data carries no variation at all, so a structured model
    (more than one state or mixture component) cannot be estimated."""
