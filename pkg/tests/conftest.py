"""Shared builders for synthetic transcripts and clips."""

from __future__ import annotations

import random

from streamlace.clips import Clip
from streamlace.transcript import TimedWord, TimingSource, WordTranscript


def make_words(triples) -> list[TimedWord]:
    return [TimedWord(w, s, e) for w, s, e in triples]


def uniform_words(n: int, start: float = 0.0, rate: float = 1.0, stem: str = "w") -> list[TimedWord]:
    """n words at a constant rate (words/sec), tiled with no gaps."""
    duration = 1.0 / rate
    return [
        TimedWord(f"{stem}{i}", start + i * duration, start + (i + 1) * duration)
        for i in range(n)
    ]


def make_transcript(words, video_id: str = "vid") -> WordTranscript:
    return WordTranscript(video_id=video_id, words=list(words), timing_source=TimingSource.WORD_ALIGNED)


def make_clip(words, video_id: str = "vid", prev: str | None = None) -> Clip:
    words = list(words)
    return Clip(
        video_id=video_id,
        start_s=words[0].start_s,
        end_s=words[-1].end_s,
        words=words,
        prev_clip_last_word=prev,
    )


def random_transcript(
    rng: random.Random,
    max_words: int = 500,
    max_gap_s: float = 10.0,
    video_id: str = "vid",
) -> WordTranscript:
    """Random word stream with silences: occasionally a gap up to max_gap_s."""
    n = rng.randrange(0, max_words + 1)
    t = rng.uniform(0.0, 5.0)
    words = []
    for i in range(n):
        duration = rng.uniform(0.05, 1.2)
        words.append(TimedWord(f"w{i}", round(t, 3), round(t + duration, 3)))
        t += duration
        if rng.random() < 0.25:
            t += rng.uniform(0.0, max_gap_s)
    return make_transcript(words, video_id)


def random_clip(
    rng: random.Random,
    min_words: int = 1,
    max_words: int = 240,
    video_id: str = "vid",
) -> Clip:
    """Random clip whose words tile a span with small internal pauses."""
    n = rng.randrange(min_words, max_words + 1)
    t = 0.0
    words = []
    for i in range(n):
        duration = rng.uniform(0.1, 0.9)
        words.append(TimedWord(f"w{i}", round(t, 3), round(t + duration, 3)))
        t += duration
        if rng.random() < 0.2:
            t += rng.uniform(0.0, 2.5)
    clip = make_clip(words, video_id)
    # clip-relative timing: shift so the clip starts at zero
    offset = clip.start_s
    clip.words = [TimedWord(w.surface, w.start_s - offset, w.end_s - offset) for w in clip.words]
    clip.start_s = 0.0
    clip.end_s = clip.words[-1].end_s
    return clip
