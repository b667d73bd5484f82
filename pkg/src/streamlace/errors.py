"""Exception types shared across the toolkit."""

from __future__ import annotations


class MalformedTimestamp(ValueError):
    """A caption timestamp could not be parsed."""


class InvertedSpan(ValueError):
    """A cue or segment ends at or before its start."""


class SchemaViolation(ValueError):
    """An input record does not conform to its documented schema."""


class ConfigError(ValueError):
    """A policy or pipeline configuration violates its invariants."""


class MissingPrompt(ValueError):
    """An SFT record was requested without a user prompt."""


class EmptyGroundTruth(ValueError):
    """A judge prompt was requested with empty reference commentary."""


class NoValidJudgments(ValueError):
    """Win-rate aggregation received no valid judgments."""


class ScorerFailure(RuntimeError):
    """A text scorer implementation failed to produce a value."""


class DetectorFailure(RuntimeError):
    """A language or talking-head detector failed to produce a value."""


class JudgeFailure(RuntimeError):
    """The judge transport failed after the configured retries."""


class DecoderFailure(RuntimeError):
    """The stream decoder failed mid-stream.

    Carries the metrics accumulated up to the failing round in
    ``partial_metrics`` so callers can still report them.
    """

    def __init__(self, message: str, partial_metrics=None):
        super().__init__(message)
        self.partial_metrics = partial_metrics
