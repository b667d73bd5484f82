"""Densely interleaved frame/word training sequences.

A clip becomes a sequence of time steps: each step holds the frame slots for
its interval followed by the words whose utterance *ends* inside it, so text
is only ever predicted after the frames that cover it. Every step's text is
terminated with the ellipsis marker; steps with no words carry the marker
alone, which is how a pause is distinguished from the true end of the
sequence (the absence of further frames).

An unsupervised context block (title and/or preceding transcript text) may
precede the first step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .clips import Clip
from .errors import ConfigError, MissingPrompt
from .transcript import TimedWord

EOS_MARKER = " ..."
FRAME_PLACEHOLDER = "<frame>"


class ContextMode(str, Enum):
    NONE = "none"
    TITLE = "title"
    PREV_ASR = "prev_asr"
    TITLE_AND_PREV = "title_and_prev"
    TITLE_OR_PREV = "title_or_prev"


class Role(str, Enum):
    CONTEXT_UNSUPERVISED = "context"
    FRAME_PLACEHOLDER = "frames"
    WORD_SUPERVISED = "words"


@dataclass
class InterleavePolicy:
    """Frame rate, interval structure, and context policy for sequences.

    The first interval may be longer than the rest (default 3s then 1s);
    passing ``first_interval_s == interval_s`` gives the uniform structure.
    ``fps * interval_s`` must be whole so every step maps to an integer
    number of frame slots.
    """

    fps: float = 2.0
    first_interval_s: float = 3.0
    interval_s: float = 1.0
    eos_token: str = EOS_MARKER
    context_mode: ContextMode = ContextMode.TITLE_OR_PREV
    prev_asr_char_cap: int | None = None

    def __post_init__(self):
        if self.fps <= 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if not self.first_interval_s >= self.interval_s > 0:
            raise ConfigError(
                f"need first_interval_s >= interval_s > 0, got "
                f"{self.first_interval_s}/{self.interval_s}"
            )
        if not self.eos_token:
            raise ConfigError("eos_token must be non-empty")
        for label, width in (("interval_s", self.interval_s), ("first_interval_s", self.first_interval_s)):
            slots = self.fps * width
            if abs(slots - round(slots)) > 1e-9:
                raise ConfigError(f"fps*{label} must be a whole number of frames, got {slots}")
        ratio = self.first_interval_s / self.interval_s
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("first_interval_s must be a whole multiple of interval_s")

    def uniform(self) -> "InterleavePolicy":
        """The same policy with a uniform interval structure."""
        return InterleavePolicy(
            fps=self.fps,
            first_interval_s=self.interval_s,
            interval_s=self.interval_s,
            eos_token=self.eos_token,
            context_mode=self.context_mode,
            prev_asr_char_cap=self.prev_asr_char_cap,
        )


@dataclass(slots=True)
class TimeStep:
    """One interval: its frame slots and the words assigned to it."""

    t0_s: float
    t1_s: float
    frame_slots: int
    words: list[TimedWord]
    text: str


@dataclass(frozen=True)
class RoleSpan:
    start: int
    end: int
    role: Role


@dataclass(slots=True)
class InterleavedSequence:
    video_id: str
    context: str
    steps: list[TimeStep]
    role_spans: list[RoleSpan] = field(default_factory=list)

    def span_s(self) -> float:
        return self.steps[-1].t1_s if self.steps else 0.0


def build_intervals(clip_span_s: float, policy: InterleavePolicy) -> list[tuple[float, float]]:
    """Tile [0, span] with a first interval then unit intervals.

    The first interval is min(first_interval_s, span); the final interval is
    truncated to the span.
    """
    if clip_span_s <= 0:
        raise ValueError(f"clip span must be positive, got {clip_span_s}")
    eps = 1e-9
    bounds = [0.0, min(policy.first_interval_s, clip_span_s)]
    while bounds[-1] < clip_span_s - eps:
        bounds.append(min(bounds[-1] + policy.interval_s, clip_span_s))
    return list(zip(bounds, bounds[1:]))


def grid_aligned_span(raw_span_s: float, policy: InterleavePolicy) -> float:
    """Round a span up to the interval grid so frame slots stay integral."""
    if raw_span_s <= 0:
        raise ValueError(f"clip span must be positive, got {raw_span_s}")
    unit = policy.interval_s
    steps = math.ceil(raw_span_s / unit - 1e-9)
    return max(steps, 1) * unit


def assign_words(
    clip: Clip, intervals: list[tuple[float, float]], policy: InterleavePolicy | None = None
) -> list[TimeStep]:
    """Assign each word to the interval containing its end timestamp.

    Timestamps are clip-relative; intervals are half-open [t0, t1), except a
    word ending exactly at the final boundary lands in the last interval.
    Words arrive sorted, so a single forward sweep covers them all.
    """
    policy = policy or InterleavePolicy()
    final_t1 = intervals[-1][1]
    steps: list[TimeStep] = []
    idx = 0
    words = clip.words
    for t0, t1 in intervals:
        here: list[TimedWord] = []
        is_last = t1 == final_t1
        while idx < len(words):
            end_rel = words[idx].end_s - clip.start_s
            # the final boundary is closed, with headroom for float drift in
            # word ends accumulated by repeated addition
            if end_rel < t1 or (is_last and end_rel <= t1 + 1e-9):
                here.append(words[idx])
                idx += 1
            else:
                break
        text = (" ".join(w.surface for w in here)) + policy.eos_token
        slots = int(round(policy.fps * (t1 - t0)))
        steps.append(TimeStep(t0_s=t0, t1_s=t1, frame_slots=slots, words=here, text=text))
    if idx != len(words):
        leftover = words[idx].end_s - clip.start_s
        raise ValueError(f"word ending at {leftover}s falls outside the interval grid")
    return steps


def build_context(title: str, prev_asr: str | None, mode: ContextMode) -> str:
    """Assemble the unsupervised context prefix for a clip.

    A newline joins title and preceding transcript when both are present.
    ``TITLE_OR_PREV`` uses the title only when no preceding text exists.
    """
    has_prev = bool(prev_asr)
    if mode is ContextMode.NONE:
        return ""
    if mode is ContextMode.PREV_ASR:
        return prev_asr or ""
    if mode is ContextMode.TITLE:
        _require_title(title)
        return title
    if mode is ContextMode.TITLE_AND_PREV:
        _require_title(title)
        return f"{title}\n{prev_asr}" if has_prev else title
    if mode is ContextMode.TITLE_OR_PREV:
        if has_prev:
            return prev_asr  # type: ignore[return-value]
        _require_title(title)
        return title
    raise ValueError(f"unknown context mode: {mode}")


def _require_title(title: str) -> None:
    if not title:
        raise ValueError("a title-using context mode needs a non-empty title")


def emit_pretrain_record(clip: Clip, context: str, policy: InterleavePolicy) -> InterleavedSequence:
    """Build the interleaved sequence for one gated clip.

    The clip span is aligned up to the interval grid (the trailing partial
    interval is absorbed into a whole final step), then words are assigned
    and role spans computed over the serialized text: context unsupervised,
    frame placeholders, step text supervised.
    """
    if not clip.words:
        raise ValueError("cannot interleave an empty clip")
    if policy.prev_asr_char_cap is not None and len(context) > policy.prev_asr_char_cap:
        context = context[-policy.prev_asr_char_cap :]
    span = grid_aligned_span(clip.end_s - clip.start_s, policy)
    intervals = build_intervals(span, policy)
    steps = assign_words(clip, intervals, policy)
    seq = InterleavedSequence(video_id=clip.video_id, context=context, steps=steps)
    seq.role_spans = _compute_role_spans(seq)
    return seq


def _compute_role_spans(seq: InterleavedSequence) -> list[RoleSpan]:
    spans: list[RoleSpan] = []
    pos = 0
    if seq.context:
        spans.append(RoleSpan(0, len(seq.context), Role.CONTEXT_UNSUPERVISED))
        pos = len(seq.context)
    for step in seq.steps:
        frames_len = len(FRAME_PLACEHOLDER) * step.frame_slots
        spans.append(RoleSpan(pos, pos + frames_len, Role.FRAME_PLACEHOLDER))
        pos += frames_len
        spans.append(RoleSpan(pos, pos + len(step.text), Role.WORD_SUPERVISED))
        pos += len(step.text)
    return spans


def serialize_sequence(seq: InterleavedSequence) -> str:
    """Render a sequence as text: context, then frames and words per step."""
    parts = [seq.context]
    for step in seq.steps:
        parts.append(FRAME_PLACEHOLDER * step.frame_slots)
        parts.append(step.text)
    return "".join(parts)


def emit_sft_record(clip: Clip, user_prompt: str, policy: InterleavePolicy) -> dict:
    """Build a conversation record: user prompt, then frame/text rounds.

    Instruction-tuning context is the user prompt alone; no title or
    preceding transcript is attached.
    """
    if not user_prompt or not user_prompt.strip():
        raise MissingPrompt("SFT records require a user prompt")
    if not clip.words:
        raise ValueError("cannot interleave an empty clip")
    span = grid_aligned_span(clip.end_s - clip.start_s, policy)
    steps = assign_words(clip, build_intervals(span, policy), policy)
    return {
        "video_id": clip.video_id,
        "prompt": user_prompt,
        "rounds": [
            {
                "t0_ms": int(round(s.t0_s * 1000)),
                "t1_ms": int(round(s.t1_s * 1000)),
                "frames": s.frame_slots,
                "text": s.text,
            }
            for s in steps
        ],
        "schema_version": 1,
    }


def reconstruct_transcript(seq: InterleavedSequence, eos_token: str = EOS_MARKER) -> str:
    """Invert interleaving: strip the per-step EOS marker and rejoin words."""
    parts = []
    for step in seq.steps:
        text = step.text
        if text.endswith(eos_token):
            text = text[: -len(eos_token)]
        if text:
            parts.append(text)
    return " ".join(parts)
