"""Gap-driven clip segmentation and length/speech-rate retention rules."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

from .decisions import DropReason
from .errors import ConfigError
from .transcript import TimedWord, WordTranscript

SENTENCE_END_CHARS = (".", "?", "!")


@dataclass
class ClipPolicy:
    """Segmentation and retention thresholds.

    ``sentence_start_mode`` additionally requires clips to begin at a
    sentence boundary (used for instruction-tuning data, where no preceding
    transcript context is available to the consumer).
    """

    gap_split_s: float = 3.0
    min_len_s: float = 30.0
    max_len_s: float = 240.0
    rate_min: float = 1.0
    rate_max: float = 4.0
    sentence_start_mode: bool = False

    def __post_init__(self):
        if not 0 < self.min_len_s <= self.max_len_s:
            raise ConfigError(
                f"need 0 < min_len_s <= max_len_s, got {self.min_len_s}/{self.max_len_s}"
            )
        if not self.rate_min < self.rate_max:
            raise ConfigError(f"need rate_min < rate_max, got {self.rate_min}/{self.rate_max}")
        if self.gap_split_s <= 0:
            raise ConfigError(f"need gap_split_s > 0, got {self.gap_split_s}")


@dataclass(slots=True)
class Clip:
    """A contiguous run of transcript words treated as one training unit.

    ``prev_clip_last_word`` is the final word of the preceding candidate in
    the same video's word stream (None for the first clip); the sentence
    boundary rule reads it.
    """

    video_id: str
    start_s: float
    end_s: float
    words: list[TimedWord]
    prev_clip_last_word: str | None = None

    @property
    def span_s(self) -> float:
        return self.end_s - self.start_s

    def text(self) -> str:
        return " ".join(w.surface for w in self.words)


@dataclass
class SegmentationReport:
    kept: int = 0
    dropped_by_reason: Counter = field(default_factory=Counter)

    @property
    def candidates(self) -> int:
        return self.kept + sum(self.dropped_by_reason.values())


def segment_by_gaps(transcript: WordTranscript, policy: ClipPolicy) -> list[Clip]:
    """Partition a transcript into candidate clips.

    A new clip starts when the silence before a word exceeds
    ``gap_split_s``, or when including the word would stretch the clip past
    ``max_len_s``. Every word lands in exactly one candidate; no retention
    filtering happens here.
    """
    words = transcript.words
    if not words:
        return []
    clips: list[Clip] = []
    start_idx = 0
    clip_start = words[0].start_s
    prev_last: str | None = None

    def close(end_idx: int) -> None:
        nonlocal start_idx, clip_start, prev_last
        run = words[start_idx:end_idx]
        clips.append(
            Clip(
                video_id=transcript.video_id,
                start_s=clip_start,
                end_s=run[-1].end_s,
                words=run,
                prev_clip_last_word=prev_last,
            )
        )
        prev_last = run[-1].surface
        start_idx = end_idx
        clip_start = words[end_idx].start_s if end_idx < len(words) else 0.0

    for i in range(1, len(words)):
        gap = words[i].start_s - words[i - 1].end_s
        if gap > policy.gap_split_s or words[i].end_s - clip_start > policy.max_len_s:
            close(i)
    close(len(words))
    return clips


def speech_rate(clip: Clip) -> float:
    """Words per second over the clip's wall-time span (inf for zero span)."""
    span = clip.end_s - clip.start_s
    if span <= 0:
        return math.inf
    return len(clip.words) / span


def retention_reason(clip: Clip, policy: ClipPolicy) -> DropReason | None:
    """First failing retention rule for a candidate, or None when kept.

    Rules run in a fixed order so a clip failing several is reported once.
    """
    if clip.span_s < policy.min_len_s:
        return DropReason.TOO_SHORT
    rate = speech_rate(clip)
    if rate < policy.rate_min:
        return DropReason.RATE_LOW
    if rate > policy.rate_max:
        return DropReason.RATE_HIGH
    if policy.sentence_start_mode and not starts_sentence(clip):
        return DropReason.BAD_SENTENCE_START
    return None


def filter_clips(
    candidates: list[Clip], policy: ClipPolicy
) -> tuple[list[Clip], SegmentationReport]:
    """Apply length, speech-rate, and (optionally) sentence-start retention."""
    report = SegmentationReport()
    kept: list[Clip] = []
    for clip in candidates:
        reason = retention_reason(clip, policy)
        if reason is None:
            kept.append(clip)
            report.kept += 1
        else:
            report.dropped_by_reason[reason] += 1
    return kept, report


def starts_sentence(clip: Clip) -> bool:
    """True iff the previous word (if any) closed a sentence and this clip
    opens with an uppercase letter."""
    prev = clip.prev_clip_last_word
    if prev is not None and not prev.endswith(SENTENCE_END_CHARS):
        return False
    if not clip.words:
        return False
    first_char = clip.words[0].surface[0]
    return first_char.isupper()


def enforce_sentence_start(clips: list[Clip]) -> list[Clip]:
    return [c for c in clips if starts_sentence(c)]
