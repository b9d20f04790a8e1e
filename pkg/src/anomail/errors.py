"""Exception types raised across the detection pipeline."""


class AnomailError(Exception):
    """Base class for all errors raised by this package."""


class MalformedLine(AnomailError):
    """A JSONL line is not valid JSON or lacks a required field."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class InvalidValue(AnomailError):
    """A field value violates its contract (bad IP, bad direction, ...)."""


class NoHeaders(AnomailError):
    """A raw header block contained no parseable header line."""


class MissingRequired(AnomailError):
    """A required header or envelope field is absent."""


class EmptyCorpus(AnomailError):
    """An operation requiring at least one event received none."""


class EmptyVocabulary(AnomailError):
    """No token reached min_count when building the vocabulary."""


class InvalidParams(AnomailError):
    """Hyperparameters outside their documented ranges."""


class TooFewPoints(AnomailError):
    """Fewer points than the neighborhood size requires."""


class DegenerateData(AnomailError):
    """All training points are identical; no density structure exists."""


class DimensionMismatch(AnomailError):
    """Vector dimensionality differs from the fitted model."""


class ZeroVector(AnomailError):
    """Cosine similarity of two all-zero vectors is undefined."""


class LengthMismatch(AnomailError):
    """Vectors of different lengths cannot be compared."""


class TooFewTrainingEvents(AnomailError):
    """Training window smaller than the neighbor count requires."""


class EmptyDetectWindow(AnomailError):
    """A detection cycle was requested with no events to score."""


class OutOfOrderEvent(AnomailError):
    """A streamed event's timestamp regressed beyond the tolerance."""


class UnsupportedFormat(AnomailError):
    """Unknown export format name."""


class InvalidSpec(AnomailError):
    """A synthetic generator spec violates its invariants."""
