"""Deterministic per-round streaming schedule with KV token accounting.

The stream advances in rounds (a longer first round, then fixed short
rounds). Each round feeds its frames' visual tokens into the ledger, asks
the decoder for that round's words, and stamps the words with the round-end
time as their availability. Whenever playback crosses a multiple of the
visual window, all visual tokens are discarded while text tokens are
retained and the model is re-prefilled — a counted event, so memory held by
visual tokens stays bounded no matter how long the stream runs.

Latency is tracked in whatever cost units the decoder reports, which keeps
simulations deterministic; wall-clock adapters can wrap real decoders.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .errors import ConfigError, DecoderFailure
from .ndjson_proc import NdjsonProcess, ProcessProtocolError
from .transcript import WordTranscript


@dataclass
class StreamConfig:
    fps: float = 2.0
    first_round_s: float = 3.0
    round_s: float = 1.0
    visual_window_s: float = 240.0
    visual_tokens_per_frame: int = 1

    def __post_init__(self):
        if min(self.fps, self.first_round_s, self.round_s, self.visual_window_s) <= 0:
            raise ConfigError("all stream timing parameters must be positive")
        if self.visual_tokens_per_frame <= 0:
            raise ConfigError("visual_tokens_per_frame must be positive")
        for label, value in (("visual_window_s", self.visual_window_s), ("first_round_s", self.first_round_s)):
            ratio = value / self.round_s
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(f"{label} must be a whole multiple of round_s")

    @property
    def max_visual_tokens(self) -> int:
        return int(round(self.visual_window_s * self.fps)) * self.visual_tokens_per_frame


@dataclass(frozen=True)
class EvictionEvent:
    video_time_s: float
    visual_tokens_dropped: int
    text_tokens_retained: int


@dataclass
class KvLedger:
    """Token-count bookkeeping standing in for the decoder's KV cache."""

    context_text_tokens: int = 0
    generated_text_tokens: int = 0
    visual_tokens: int = 0
    evictions: list[EvictionEvent] = field(default_factory=list)
    prefills: int = 0


class Decoder(Protocol):
    def prefill(self, text_token_count: int, visual_token_count: int) -> None: ...

    def decode_round(self, frame_count: int) -> tuple[list[str], float]:
        """Return (words emitted this round, decode cost in abstract units)."""


@dataclass(frozen=True)
class Round:
    t0_s: float
    t1_s: float
    frame_count: int


@dataclass(frozen=True)
class EmittedWord:
    surface: str
    available_at_s: float


@dataclass
class Commentary:
    words: list[EmittedWord] = field(default_factory=list)

    @property
    def text(self) -> str:
        return " ".join(w.surface for w in self.words)


@dataclass(frozen=True)
class RoundMetric:
    video_time_s: float
    words_emitted: int
    latency_units: float


@dataclass
class StreamMetrics:
    per_round: list[RoundMetric] = field(default_factory=list)
    max_latency: float = 0.0
    mean_latency: float = 0.0
    total_words: int = 0
    evictions: list[EvictionEvent] = field(default_factory=list)
    prefills: int = 0

    def finalize(self, ledger: KvLedger | None = None) -> "StreamMetrics":
        if self.per_round:
            self.max_latency = max(m.latency_units for m in self.per_round)
            self.mean_latency = sum(m.latency_units for m in self.per_round) / len(self.per_round)
        self.total_words = sum(m.words_emitted for m in self.per_round)
        if ledger is not None:
            self.evictions = list(ledger.evictions)
            self.prefills = ledger.prefills
        return self


@dataclass
class StreamState:
    ledger: KvLedger = field(default_factory=KvLedger)
    metrics: StreamMetrics = field(default_factory=StreamMetrics)
    commentary: Commentary = field(default_factory=Commentary)
    next_eviction_boundary_s: float = 0.0  # lazily set to the window on first check


@dataclass(frozen=True)
class RoundOutcome:
    round: Round
    words: list[str]
    latency_units: float


def plan_rounds(duration_s: float, config: StreamConfig) -> list[Round]:
    """Lay out the round schedule for a stream of the given duration.

    Frame counts come from counting sample ticks (at 1/fps spacing) inside
    each round, so truncated final rounds get exactly the frames that exist.
    """
    if duration_s <= 0:
        return []
    eps = 1e-9
    bounds = [0.0, min(config.first_round_s, duration_s)]
    while bounds[-1] < duration_s - eps:
        bounds.append(min(bounds[-1] + config.round_s, duration_s))
    rounds = []
    for t0, t1 in zip(bounds, bounds[1:]):
        frames = _ticks_before(t1, config.fps) - _ticks_before(t0, config.fps)
        rounds.append(Round(t0, t1, frames))
    return rounds


def _ticks_before(t: float, fps: float) -> int:
    """Number of frame sample times k/fps with k/fps < t."""
    return max(0, math.ceil(t * fps - 1e-9))


def step_round(state: StreamState, rnd: Round, decoder: Decoder, config: StreamConfig) -> RoundOutcome:
    """Feed one round's frames and decode its words, updating the ledger."""
    state.ledger.visual_tokens += rnd.frame_count * config.visual_tokens_per_frame
    try:
        words, cost = decoder.decode_round(rnd.frame_count)
    except Exception as exc:
        raise DecoderFailure(str(exc), partial_metrics=state.metrics.finalize(state.ledger)) from exc
    for word in words:
        state.commentary.words.append(EmittedWord(word, rnd.t1_s))
    state.ledger.generated_text_tokens += len(words)
    state.metrics.per_round.append(RoundMetric(rnd.t1_s, len(words), cost))
    return RoundOutcome(rnd, list(words), cost)


def maybe_evict(state: StreamState, video_time_s: float, config: StreamConfig) -> EvictionEvent | None:
    """Drop all visual tokens when playback crosses the visual window.

    Text tokens (context and generated) are retained; the decoder is
    re-prefilled with them, which is counted in the ledger.
    """
    if state.next_eviction_boundary_s <= 0:
        state.next_eviction_boundary_s = config.visual_window_s
    if video_time_s < state.next_eviction_boundary_s - 1e-9:
        return None
    dropped = state.ledger.visual_tokens
    retained = state.ledger.context_text_tokens + state.ledger.generated_text_tokens
    state.ledger.visual_tokens = 0
    state.ledger.prefills += 1
    event = EvictionEvent(video_time_s, dropped, retained)
    state.ledger.evictions.append(event)
    window = config.visual_window_s
    crossed = int(video_time_s / window + 1e-9)
    state.next_eviction_boundary_s = (crossed + 1) * window
    return event


def run_stream(
    manifest: Sequence[float] | float,
    decoder: Decoder,
    config: StreamConfig,
    context_text_tokens: int = 0,
) -> tuple[Commentary, StreamMetrics]:
    """Drive a full stream: plan rounds, decode each, evict on schedule.

    ``manifest`` is either the stream duration in seconds or the frame
    timestamps themselves (monotone, at 1/fps spacing). Eviction is checked
    at round boundaries; a stream ending exactly on a window boundary does
    not evict a final time.
    """
    duration_s = manifest if isinstance(manifest, (int, float)) else manifest_duration(manifest, config)
    state = StreamState()
    state.ledger.context_text_tokens = context_text_tokens
    state.next_eviction_boundary_s = config.visual_window_s
    rounds = plan_rounds(duration_s, config)
    if rounds:
        decoder.prefill(context_text_tokens, 0)
        state.ledger.prefills += 1
    for i, rnd in enumerate(rounds):
        step_round(state, rnd, decoder, config)
        if i < len(rounds) - 1:
            event = maybe_evict(state, rnd.t1_s, config)
            if event is not None:
                decoder.prefill(event.text_tokens_retained, 0)
    return state.commentary, state.metrics.finalize(state.ledger)


def manifest_duration(frame_times_s: Iterable[float], config: StreamConfig) -> float:
    """Duration implied by frame timestamps: last tick plus one frame period."""
    last = None
    for t in frame_times_s:
        if last is not None and t < last:
            raise ValueError("frame timestamps must be monotone")
        last = t
    if last is None:
        return 0.0
    return last + 1.0 / config.fps


class ReplayDecoder:
    """Replays a ground-truth transcript as the decode output.

    Each round emits the words whose end timestamps fall inside the round's
    interval (the same end-timestamp rule the interleaver uses); the clock
    advances from the frame counts it is fed, so no round bookkeeping is
    needed. Once the clock reaches the transcript's end, remaining words
    flush into that round. Cost is one unit per emitted word plus a fixed
    floor, purely so latency metrics are non-trivial.
    """

    def __init__(self, ground_truth: WordTranscript, fps: float = 2.0, cost_per_word: float = 1.0):
        self._words = sorted(ground_truth.words, key=lambda w: (w.end_s, w.start_s))
        self._span = self._words[-1].end_s if self._words else 0.0
        self._fps = fps
        self._cost_per_word = cost_per_word
        self._clock = 0.0
        self._idx = 0

    def prefill(self, text_token_count: int, visual_token_count: int) -> None:
        pass

    def decode_round(self, frame_count: int) -> tuple[list[str], float]:
        t1 = self._clock + frame_count / self._fps
        flush = t1 >= self._span - 1e-9
        out: list[str] = []
        while self._idx < len(self._words) and (flush or self._words[self._idx].end_s < t1):
            out.append(self._words[self._idx].surface)
            self._idx += 1
        self._clock = t1
        return out, self._cost_per_word * len(out) + 0.1


def replay_decoder(ground_truth: WordTranscript, fps: float = 2.0) -> ReplayDecoder:
    return ReplayDecoder(ground_truth, fps=fps)


class WallClockDecoder:
    """Wraps a decoder so latency is reported in elapsed seconds.

    Simulated decoders report abstract cost units to keep tests
    deterministic; wrap a real decoder in this adapter to get wall-clock
    latencies in the stream metrics instead.
    """

    def __init__(self, inner: Decoder, clock=None):
        self._inner = inner
        self._clock = clock or time.monotonic

    def prefill(self, text_token_count: int, visual_token_count: int) -> None:
        self._inner.prefill(text_token_count, visual_token_count)

    def decode_round(self, frame_count: int) -> tuple[list[str], float]:
        started = self._clock()
        words, _ = self._inner.decode_round(frame_count)
        return words, self._clock() - started


class ExternalProcessDecoder:
    """Delegates decoding to a child process over NDJSON.

    Each round sends ``{"op": "decode", "frames": int, "round_t1_ms": int}``
    and expects ``{"words": [...], "cost": float}`` back. The round-end
    timestamp is tracked here from the frame counts, so the child only needs
    to answer requests. Prefill stays local: the child owns whatever cache
    state it keeps.
    """

    def __init__(self, argv: list[str], fps: float = 2.0, timeout_s: float = 30.0):
        self._proc = NdjsonProcess(argv, timeout_s)
        self._fps = fps
        self._clock_ms = 0

    def prefill(self, text_token_count: int, visual_token_count: int) -> None:
        pass

    def decode_round(self, frame_count: int) -> tuple[list[str], float]:
        self._clock_ms += int(round(frame_count * 1000 / self._fps))
        try:
            response = self._proc.request(
                {"op": "decode", "frames": frame_count, "round_t1_ms": self._clock_ms}
            )
            words = [str(w) for w in response["words"]]
            cost = float(response["cost"])
        except ProcessProtocolError as exc:
            raise DecoderFailure(str(exc)) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise DecoderFailure(f"external decoder response malformed: {exc}") from exc
        return words, cost

    def close(self) -> None:
        self._proc.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
