"""JSON Lines record schemas, canonical serialization, and sharding.

Timestamps are real-valued seconds in memory but millisecond integers on
disk, so golden files are bit-exact. Records are always written in a
canonical order — (video_id, start_ms) for timeline records — and sharding
assigns whole videos to shards by a stable hash, so the number of shards
never changes the merged output bytes.
"""

from __future__ import annotations

import hashlib
import json
from typing import Iterable, Iterator

from .clips import Clip
from .errors import SchemaViolation
from .interleave import ContextMode, InterleavedSequence
from .transcript import TimedWord, TimingSource, VideoMeta, WordTranscript

SCHEMA_VERSION = 1


def ms(seconds: float) -> int:
    return int(round(seconds * 1000))


def sec(milliseconds: int) -> float:
    return milliseconds / 1000.0


def dumps(record: dict) -> str:
    """Canonical one-line JSON: no spaces, keys in insertion order."""
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def read_jsonl(path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"{path}:{lineno}: invalid JSON: {exc}") from exc


def write_jsonl(path, records: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dumps(record) + "\n")
            count += 1
    return count


def shard_index(video_id: str, n_shards: int) -> int:
    """Stable shard assignment, independent of process hash randomization."""
    digest = hashlib.md5(video_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % n_shards


def partition_by_shard(records: Iterable[dict], n_shards: int, key: str = "video_id") -> list[list[dict]]:
    shards: list[list[dict]] = [[] for _ in range(n_shards)]
    for record in records:
        shards[shard_index(str(record[key]), n_shards)].append(record)
    return shards


def timeline_sort_key(record: dict) -> tuple:
    return (record["video_id"], record.get("start_ms", 0))


# --- words ---------------------------------------------------------------


def word_to_json(word: TimedWord) -> dict:
    return {"w": word.surface, "s_ms": ms(word.start_s), "e_ms": ms(word.end_s)}


def word_from_json(obj: dict) -> TimedWord:
    try:
        return TimedWord(str(obj["w"]), sec(int(obj["s_ms"])), sec(int(obj["e_ms"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"bad word record {obj!r}: {exc}") from exc


# --- transcripts ----------------------------------------------------------


def transcript_to_record(transcript: WordTranscript) -> dict:
    return {
        "video_id": transcript.video_id,
        "timing_source": transcript.timing_source.value,
        "words": [word_to_json(w) for w in transcript.words],
        "schema_version": SCHEMA_VERSION,
    }


def transcript_from_record(obj: dict) -> WordTranscript:
    try:
        return WordTranscript(
            video_id=str(obj["video_id"]),
            words=[word_from_json(w) for w in obj["words"]],
            timing_source=TimingSource(obj["timing_source"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"bad transcript record: {exc}") from exc


# --- clips ----------------------------------------------------------------


def clip_to_record(clip: Clip) -> dict:
    return {
        "video_id": clip.video_id,
        "start_ms": ms(clip.start_s),
        "end_ms": ms(clip.end_s),
        "n_words": len(clip.words),
        "words": [word_to_json(w) for w in clip.words],
        "prev_last_word": clip.prev_clip_last_word,
        "schema_version": SCHEMA_VERSION,
    }


def clip_from_record(obj: dict) -> Clip:
    try:
        return Clip(
            video_id=str(obj["video_id"]),
            start_s=sec(int(obj["start_ms"])),
            end_s=sec(int(obj["end_ms"])),
            words=[word_from_json(w) for w in obj["words"]],
            prev_clip_last_word=obj.get("prev_last_word"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"bad clip record: {exc}") from exc


# --- interleaved sequences -------------------------------------------------


def sequence_to_record(seq: InterleavedSequence, context_mode: ContextMode) -> dict:
    return {
        "video_id": seq.video_id,
        "context": seq.context,
        "context_mode": context_mode.value,
        "steps": [
            {
                "t0_ms": ms(step.t0_s),
                "t1_ms": ms(step.t1_s),
                "frames": step.frame_slots,
                "text": step.text,
            }
            for step in seq.steps
        ],
        "schema_version": SCHEMA_VERSION,
    }


# --- video metadata ---------------------------------------------------------


def meta_from_record(obj: dict) -> VideoMeta:
    try:
        return VideoMeta(
            video_id=str(obj["video_id"]),
            title=str(obj["title"]),
            duration_s=float(obj["duration_s"]),
            category=str(obj["category"]),
            language_tag=str(obj["language_tag"]),
            resolution_height=int(obj["height"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(f"bad metadata record: {exc}") from exc


def meta_to_record(meta: VideoMeta) -> dict:
    return {
        "video_id": meta.video_id,
        "title": meta.title,
        "duration_s": meta.duration_s,
        "category": meta.category,
        "language_tag": meta.language_tag,
        "height": meta.resolution_height,
    }


def load_meta_index(path) -> dict[str, VideoMeta]:
    return {m.video_id: m for m in (meta_from_record(obj) for obj in read_jsonl(path))}
