"""Exception hierarchy shared across the package."""


class EvoSynthError(Exception):
    """Base class for all package errors."""


class ConfigError(EvoSynthError, ValueError):
    """Invalid configuration value; ``key`` names the offending setting."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ShapeError(EvoSynthError, ValueError):
    pass


class IncompatibleParentsError(EvoSynthError, ValueError):
    pass


class NoCandidatesError(EvoSynthError):
    """Raised when a synthesis step has no synapse that could survive."""


class DegenerateNetworkError(EvoSynthError, ValueError):
    pass


class DegeneratePopulationError(EvoSynthError):
    """Every offspring of a generation failed to synthesize."""

    def __init__(self, generation, message=None):
        self.generation = generation
        super().__init__(message or f"generation {generation}: no offspring could be synthesized")


class DivergenceError(EvoSynthError, FloatingPointError):
    pass


class IdxFormatError(EvoSynthError, ValueError):
    pass


class BadMagicError(IdxFormatError):
    pass


class TruncatedFileError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


class GenomeFormatError(EvoSynthError, ValueError):
    pass


class ManifestError(EvoSynthError):
    pass
