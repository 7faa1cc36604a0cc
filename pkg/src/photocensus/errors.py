"""Exception taxonomy shared across the package."""


class PhotoCensusError(Exception):
    """Base class for all package-specific errors."""


class ParseError(PhotoCensusError):
    """Record line is not syntactically valid JSON.

    Carries the byte offset of the failure within the input (offset of the
    line start plus the decoder's position inside the line).
    """

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ValidationError(PhotoCensusError):
    """Record is well-formed JSON but violates a field constraint."""

    def __init__(self, field: str, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"invalid field {field!r}{detail}")
        self.field = field


class ConfigError(PhotoCensusError):
    """Configuration is incomplete or inconsistent."""


class DimensionError(PhotoCensusError):
    """Embeddings of different dimensions were compared."""


class DegenerateEmbeddingError(PhotoCensusError):
    """An embedding with zero norm cannot be scored."""


class SelfMatchError(PhotoCensusError):
    """A decision pairs an annotation with itself."""


class UndefinedEstimateError(PhotoCensusError):
    """The requested estimator is undefined for the given counts (k = 0)."""
