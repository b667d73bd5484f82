"""Caption and transcript ingestion into a normalized word-level timeline.

Two input channels are supported: segment-level closed captions (fixed-window
cues whose duration is spread uniformly over their words) and word-aligned
transcripts that already carry per-word timestamps. Both end up as a
``WordTranscript``: words sorted by start time with overlaps clamped away.

Canonical caption format (``CueList``), one cue per line::

    HH:MM:SS.mmm→HH:MM:SS.mmm | text

Word-aligned transcripts arrive as JSON, one video per line::

    {"video_id": "...", "words": [{"w": "Hi", "s": 0.1, "e": 0.3}, ...]}
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum

from .decisions import DropReason, GateDecision, KEEP
from .errors import InvertedSpan, MalformedTimestamp, SchemaViolation


class TimingSource(str, Enum):
    SEGMENT_APPROXIMATED = "segment_approximated"
    WORD_ALIGNED = "word_aligned"


class CaptionFormat(str, Enum):
    CUE_LIST = "cues"
    SEGMENT_JSON = "segment_json"


@dataclass(slots=True)
class TranscriptSegment:
    """One caption cue: a time window and the text spoken inside it."""

    start_s: float
    end_s: float
    text: str


@dataclass(slots=True)
class TimedWord:
    """A single whitespace-delimited word with its utterance span."""

    surface: str
    start_s: float
    end_s: float


@dataclass(slots=True)
class WordTranscript:
    video_id: str
    words: list[TimedWord]
    timing_source: TimingSource


@dataclass(slots=True)
class VideoMeta:
    video_id: str
    title: str
    duration_s: float
    category: str
    language_tag: str
    resolution_height: int


@dataclass(frozen=True)
class MetaConstraints:
    """Retention thresholds for video metadata (durations inclusive)."""

    min_duration_s: float = 30.0
    max_duration_s: float = 600.0
    min_height: int = 480


@dataclass
class DroppedWord:
    """A word removed during normalization, kept for reporting."""

    word: TimedWord
    reason: DropReason = DropReason.CLAMP_EXCEEDS_END


CUE_ARROW = "→"
_TS_RE = re.compile(r"^(\d{1,3}):([0-5]?\d):([0-5]?\d)\.(\d{3})$")


def parse_timestamp(text: str) -> float:
    """Parse ``HH:MM:SS.mmm`` into seconds, raising MalformedTimestamp."""
    m = _TS_RE.match(text.strip())
    if m is None:
        raise MalformedTimestamp(f"unparseable timestamp: {text!r}")
    h, mi, s, ms = (int(g) for g in m.groups())
    return h * 3600 + mi * 60 + s + ms / 1000.0


def format_timestamp(seconds: float) -> str:
    ms_total = int(round(seconds * 1000))
    h, rem = divmod(ms_total, 3_600_000)
    mi, rem = divmod(rem, 60_000)
    s, ms = divmod(rem, 1000)
    return f"{h:02d}:{mi:02d}:{s:02d}.{ms:03d}"


def parse_segment_captions(
    raw: str, format_tag: CaptionFormat = CaptionFormat.CUE_LIST
) -> list[TranscriptSegment]:
    """Parse caption text into segments, in document order.

    Malformed cues raise rather than being dropped: MalformedTimestamp for
    unparseable times, InvertedSpan when a cue ends at or before its start.
    Lines that are empty after stripping are skipped; cues whose text is
    empty are skipped as well (they carry no supervision).
    """
    if format_tag is CaptionFormat.SEGMENT_JSON:
        return _parse_segment_json(raw)
    segments: list[TranscriptSegment] = []
    for lineno, line in enumerate(raw.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        times, sep, text = line.partition("|")
        if not sep:
            raise MalformedTimestamp(f"line {lineno}: missing '|' separator")
        if CUE_ARROW not in times:
            raise MalformedTimestamp(f"line {lineno}: missing '{CUE_ARROW}' between timestamps")
        start_txt, end_txt = times.split(CUE_ARROW, 1)
        start_s = parse_timestamp(start_txt)
        end_s = parse_timestamp(end_txt)
        if end_s <= start_s:
            raise InvertedSpan(f"line {lineno}: cue ends at {end_s} <= start {start_s}")
        text = text.strip()
        if text:
            segments.append(TranscriptSegment(start_s, end_s, text))
    return segments


def _parse_segment_json(raw: str) -> list[TranscriptSegment]:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"segment JSON is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise SchemaViolation("segment JSON must be a list of objects")
    segments = []
    for i, obj in enumerate(data):
        try:
            start_s = float(obj["start_s"])
            end_s = float(obj["end_s"])
            text = str(obj["text"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"segment {i}: {exc}") from exc
        if end_s <= start_s:
            raise InvertedSpan(f"segment {i}: ends at {end_s} <= start {start_s}")
        if text.strip():
            segments.append(TranscriptSegment(start_s, end_s, text.strip()))
    return segments


def cues_from_subtitle(raw: str) -> list[TranscriptSegment]:
    """Convert common ``-->`` subtitle dialects (WebVTT/SRT) to segments.

    Convenience only; the CueList grammar above is the canonical format.
    Comma millisecond separators are accepted, cue identifiers and blank
    lines are skipped, and multi-line cue text is joined with spaces.
    """
    segments: list[TranscriptSegment] = []
    lines = [ln.strip() for ln in raw.splitlines()]
    i = 0
    while i < len(lines):
        if "-->" in lines[i]:
            start_txt, end_txt = (part.strip() for part in lines[i].split("-->", 1))
            # strip WebVTT cue settings after the end timestamp
            end_txt = end_txt.split(" ")[0]
            start_s = parse_timestamp(_normalize_subtitle_ts(start_txt))
            end_s = parse_timestamp(_normalize_subtitle_ts(end_txt))
            if end_s <= start_s:
                raise InvertedSpan(f"cue ends at {end_s} <= start {start_s}")
            i += 1
            text_lines = []
            while i < len(lines) and lines[i]:
                text_lines.append(lines[i])
                i += 1
            text = " ".join(text_lines).strip()
            if text:
                segments.append(TranscriptSegment(start_s, end_s, text))
        i += 1
    return segments


def _normalize_subtitle_ts(text: str) -> str:
    text = text.replace(",", ".")
    if text.count(":") == 1:  # WebVTT allows MM:SS.mmm
        text = "00:" + text
    return text


def approximate_word_timing(segment: TranscriptSegment) -> list[TimedWord]:
    """Spread a segment's duration uniformly over its whitespace words.

    The word spans tile the segment exactly: boundaries are computed as
    fractions of the full span and the last end is the segment end itself,
    so the durations telescope to the segment duration with no float drift.
    """
    tokens = segment.text.split()
    if not tokens:
        return []
    n = len(tokens)
    span = segment.end_s - segment.start_s
    bounds = [segment.start_s + span * i / n for i in range(n)]
    bounds.append(segment.end_s)
    return [TimedWord(tok, bounds[i], bounds[i + 1]) for i, tok in enumerate(tokens)]


def parse_word_aligned(raw: str) -> list[TimedWord]:
    """Parse one word-aligned transcript record (or a bare word array).

    Accepts either the full per-video object ``{"video_id", "words": [...]}``
    or just the ``words`` array. Word order is returned as given; monotonicity
    is not enforced here — ``normalize_transcript`` repairs ordering.
    """
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"word-aligned record is not valid JSON: {exc}") from exc
    if isinstance(data, dict):
        data = data.get("words")
    if not isinstance(data, list):
        raise SchemaViolation("word-aligned record must contain a 'words' list")
    return words_from_json(data)


def parse_word_aligned_record(raw: str) -> tuple[str, list[TimedWord]]:
    """Parse a full word-aligned JSONL line, preserving the video id."""
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"word-aligned record is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "video_id" not in data:
        raise SchemaViolation("word-aligned record must be an object with 'video_id'")
    words = data.get("words")
    if not isinstance(words, list):
        raise SchemaViolation("word-aligned record must contain a 'words' list")
    return str(data["video_id"]), words_from_json(words)


def words_from_json(items: list) -> list[TimedWord]:
    words = []
    for i, obj in enumerate(items):
        try:
            surface = str(obj["w"])
            start_s = float(obj["s"])
            end_s = float(obj["e"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"word {i}: {exc}") from exc
        if not surface or surface.split() != [surface]:
            raise SchemaViolation(f"word {i}: surface must be a single token, got {surface!r}")
        if end_s < start_s:
            raise SchemaViolation(f"word {i}: end {end_s} < start {start_s}")
        words.append(TimedWord(surface, start_s, end_s))
    return words


def normalize_transcript(
    words: list[TimedWord],
    video_id: str,
    timing_source: TimingSource = TimingSource.WORD_ALIGNED,
    dropped: list[DroppedWord] | None = None,
) -> WordTranscript:
    """Sort words by start time and clamp small overlaps away.

    A word starting before the previous word ends has its start clamped up
    to that end (zero-duration words are retained). When clamping would push
    the start past the word's own end, the word is dropped; pass ``dropped``
    to collect those for reporting.
    """
    ordered = sorted(words, key=lambda w: (w.start_s, w.end_s))
    out: list[TimedWord] = []
    cursor = float("-inf")
    for word in ordered:
        start = word.start_s
        if start < cursor:
            if cursor > word.end_s:
                if dropped is not None:
                    dropped.append(DroppedWord(word))
                continue
            start = cursor
        out.append(TimedWord(word.surface, start, word.end_s))
        cursor = out[-1].end_s
    return WordTranscript(video_id=video_id, words=out, timing_source=timing_source)


def validate_meta(meta: VideoMeta, constraints: MetaConstraints | None = None) -> GateDecision:
    """Keep a video iff duration, resolution, and title pass the thresholds."""
    c = constraints or MetaConstraints()
    if meta.duration_s < c.min_duration_s:
        return GateDecision(False, DropReason.TOO_SHORT, meta.duration_s)
    if meta.duration_s > c.max_duration_s:
        return GateDecision(False, DropReason.TOO_LONG, meta.duration_s)
    if meta.resolution_height < c.min_height:
        return GateDecision(False, DropReason.LOW_RESOLUTION, float(meta.resolution_height))
    if not meta.title.strip():
        return GateDecision(False, DropReason.MISSING_TITLE)
    return KEEP
