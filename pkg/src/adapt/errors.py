"""Exception types shared across the engine.

Every error raised by this package derives from EngineError so callers can
catch one type at the CLI / protocol boundary; the concrete subclasses mirror
the named failure modes of the individual operations.
"""


class EngineError(Exception):
    """Base class for all engine errors."""

    #: short machine-readable code used in structured CLI/protocol replies
    code = "engine_error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__doc__)


# ---------------------------------------------------------------------------
# prompt / plan construction

class InvalidPair(EngineError, ValueError):
    """Concept pair violates its invariants (empty or degenerate phrases)."""
    code = "invalid_pair"


class MissingBreak(EngineError, ValueError):
    """A prompt-sequence clause has no BREAK separator."""
    code = "missing_break"


class EmptyClause(EngineError, ValueError):
    """A prompt-sequence clause or phrase is empty."""
    code = "empty_clause"


class CountMismatch(EngineError, ValueError):
    """Context clause count does not match sequence clause count."""
    code = "count_mismatch"


class PhraseNotFound(EngineError, ValueError):
    """A rare phrase does not occur in the original prompt."""
    code = "phrase_not_found"


class AmbiguousPhrase(EngineError, ValueError):
    """A rare phrase occurs more than once in the original prompt."""
    code = "ambiguous_phrase"


class OverlappingPhrases(EngineError, ValueError):
    """Two rare phrases occupy overlapping spans of the original prompt."""
    code = "overlapping_phrases"


class InvalidPlan(EngineError, ValueError):
    """Prompt plan violates its structural invariants."""
    code = "invalid_plan"


# ---------------------------------------------------------------------------
# LLM client

class EmptyPrompt(EngineError, ValueError):
    """Input prompt is empty."""
    code = "empty_prompt"


class MissingField(EngineError, ValueError):
    """A labeled field is absent from the LLM response."""
    code = "missing_field"

    def __init__(self, field: str):
        self.field = field
        super().__init__(f"missing field: {field}")


class InconsistentCount(EngineError, ValueError):
    """Declared rare-concept count disagrees with the parsed sequence."""
    code = "inconsistent_count"


class BackendUnavailable(EngineError):
    """LLM backend could not be reached."""
    code = "backend_unavailable"


class FixtureMissing(EngineError):
    """No fixture file recorded for this prompt/model pair."""
    code = "fixture_missing"


class ConceptMappingError(EngineError):
    """Downstream parse failure while mapping concepts; carries the raw response."""
    code = "concept_mapping_error"

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(f"{message}; raw response:\n{raw}")


# ---------------------------------------------------------------------------
# attention scoring

class AxisMissing(EngineError, ValueError):
    """Required tensor axis is not declared."""
    code = "axis_missing"


class DimMismatch(EngineError, ValueError):
    """Operands have incompatible shapes."""
    code = "dim_mismatch"


class EmptyList(EngineError, ValueError):
    """An aggregation input list is empty."""
    code = "empty_list"


class IndexOutOfRange(EngineError, IndexError):
    """Sequence position outside the tensor's sequence axis."""
    code = "index_out_of_range"


class KOutOfRange(EngineError, ValueError):
    """Order statistic k outside 1..n."""
    code = "k_out_of_range"


# ---------------------------------------------------------------------------
# scheduler

class StepOutOfRange(EngineError, ValueError):
    """Timestep outside 1..T."""
    code = "step_out_of_range"


class ParityViolation(EngineError, ValueError):
    """Scores observed on an odd-offset step."""
    code = "parity_violation"


class ScoreLengthMismatch(EngineError, ValueError):
    """Observation token count changed mid-session."""
    code = "score_length_mismatch"


class LevelOutOfRange(EngineError, ValueError):
    """Visual detail level outside 1..5."""
    code = "level_out_of_range"


class RangeViolation(EngineError, ValueError):
    """Numeric argument outside its documented range."""
    code = "range_violation"


# ---------------------------------------------------------------------------
# vector math

class ZeroNorm(EngineError, ValueError):
    """Vector norm too small for a well-defined result."""
    code = "zero_norm"


class ZeroNormBase(ZeroNorm):
    """Projection base vector has (near-)zero norm."""
    code = "zero_norm_base"


# ---------------------------------------------------------------------------
# file formats / protocol

class FormatError(EngineError, ValueError):
    """Malformed tensor manifest, trace, or config file."""
    code = "format_error"


class ProtocolError(EngineError):
    """Bridge protocol violation (bad handshake, id regression, unknown op)."""
    code = "protocol_error"
