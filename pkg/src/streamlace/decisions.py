"""Keep/drop decisions and the reason codes used in filter reports."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class DropReason(str, Enum):
    # metadata gating
    TOO_SHORT = "TooShort"
    TOO_LONG = "TooLong"
    LOW_RESOLUTION = "LowResolution"
    MISSING_TITLE = "MissingTitle"
    # clip retention
    RATE_LOW = "RateLow"
    RATE_HIGH = "RateHigh"
    BAD_SENTENCE_START = "BadSentenceStart"
    # text/language/visual gates
    WRONG_LANGUAGE = "WrongLanguage"
    LOW_CONFIDENCE = "LowConfidence"
    SPARSE_CC = "SparseCC"
    TOO_PREDICTABLE = "TooPredictable"
    TOO_UNPREDICTABLE = "TooUnpredictable"
    TALKING_HEAD = "TalkingHead"
    BLOCKED_CATEGORY = "BlockedCategory"
    # external implementation failures, converted to drops
    DETECTOR_ERROR = "DetectorError"
    SCORER_ERROR = "ScorerError"
    # normalization
    CLAMP_EXCEEDS_END = "ClampExceedsEnd"


@dataclass(frozen=True)
class GateDecision:
    """Outcome of one retention predicate.

    ``measured_value`` carries the quantity the predicate compared against
    its threshold (confidence, nats/token, ...) when one exists.
    """

    keep: bool
    reason: DropReason | None = None
    measured_value: float | None = None

    def __post_init__(self):
        if not self.keep and self.reason is None:
            raise ValueError("drop decisions must carry a reason")

    def to_json(self) -> dict:
        return {
            "keep": self.keep,
            "reason": self.reason.value if self.reason else None,
            "value": self.measured_value,
        }


KEEP = GateDecision(keep=True)
