from __future__ import annotations

import random

import pytest

from streamlace.errors import ConfigError, DecoderFailure
from streamlace.interleave import InterleavePolicy, emit_pretrain_record, grid_aligned_span
from streamlace.scheduler import (
    Round,
    StreamConfig,
    StreamState,
    manifest_duration,
    maybe_evict,
    plan_rounds,
    replay_decoder,
    run_stream,
    step_round,
)
from streamlace.transcript import TimedWord

from conftest import make_clip, make_transcript, random_clip, uniform_words

CONFIG = StreamConfig()


class ScriptedDecoder:
    """Emits a fixed script of word lists, one per round."""

    def __init__(self, script):
        self.script = list(script)
        self.prefills = []
        self.round = 0

    def prefill(self, text_token_count, visual_token_count):
        self.prefills.append((text_token_count, visual_token_count))

    def decode_round(self, frame_count):
        words = self.script[self.round] if self.round < len(self.script) else []
        self.round += 1
        return list(words), float(len(words))


class ExplodingDecoder(ScriptedDecoder):
    def __init__(self, script, explode_at):
        super().__init__(script)
        self.explode_at = explode_at

    def decode_round(self, frame_count):
        if self.round == self.explode_at:
            raise RuntimeError("gpu fell over")
        return super().decode_round(frame_count)


# --- round planning -------------------------------------------------------------


def test_plan_five_seconds():
    rounds = plan_rounds(5.0, CONFIG)
    assert [(r.t0_s, r.t1_s, r.frame_count) for r in rounds] == [
        (0.0, 3.0, 6),
        (3.0, 4.0, 2),
        (4.0, 5.0, 2),
    ]


def test_plan_one_second():
    assert [(r.t0_s, r.t1_s, r.frame_count) for r in plan_rounds(1.0, CONFIG)] == [(0.0, 1.0, 2)]


def test_plan_240_seconds():
    rounds = plan_rounds(240.0, CONFIG)
    assert len(rounds) == 1 + 237
    # arithmetic oracle: total frames must equal fps * duration
    assert sum(r.frame_count for r in rounds) == int(2.0 * 240.0) == 480


def test_plan_zero_duration():
    assert plan_rounds(0.0, CONFIG) == []


def test_plan_fractional_tail_frames():
    rounds = plan_rounds(4.5, CONFIG)
    assert rounds[-1] == Round(4.0, 4.5, 1)
    assert sum(r.frame_count for r in rounds) == 9


def test_plan_frames_oracle_random_durations():
    rng = random.Random(41)
    for _ in range(100):
        duration = rng.randrange(1, 2400) * 0.5
        rounds = plan_rounds(duration, CONFIG)
        assert sum(r.frame_count for r in rounds) == round(CONFIG.fps * duration)
        assert rounds[-1].t1_s == duration


# --- single round ------------------------------------------------------------------


def test_step_round_accounting():
    config = StreamConfig(visual_tokens_per_frame=7)
    state = StreamState()
    outcome = step_round(state, Round(0.0, 3.0, 6), ScriptedDecoder([["hello", "there"]]), config)
    assert state.ledger.visual_tokens == 6 * 7
    assert state.ledger.generated_text_tokens == 2
    assert outcome.words == ["hello", "there"]
    assert [w.available_at_s for w in state.commentary.words] == [3.0, 3.0]


def test_step_round_empty_decode_still_records_latency():
    state = StreamState()
    step_round(state, Round(0.0, 3.0, 6), ScriptedDecoder([[]]), CONFIG)
    assert state.metrics.per_round[0].words_emitted == 0
    assert state.metrics.per_round[0].latency_units == 0.0


def test_decoder_failure_carries_partial_metrics():
    decoder = ExplodingDecoder([["a"], ["b"]], explode_at=1)
    with pytest.raises(DecoderFailure) as info:
        run_stream(5.0, decoder, CONFIG)
    assert info.value.partial_metrics is not None
    assert len(info.value.partial_metrics.per_round) == 1


# --- eviction ---------------------------------------------------------------------


def test_no_eviction_before_boundary():
    state = StreamState()
    state.ledger.visual_tokens = 100
    assert maybe_evict(state, 239.0, CONFIG) is None
    assert state.ledger.visual_tokens == 100


def test_eviction_at_boundary_drops_all_visual():
    config = StreamConfig(visual_tokens_per_frame=3)
    state = StreamState()
    state.ledger.visual_tokens = config.max_visual_tokens
    state.ledger.context_text_tokens = 11
    state.ledger.generated_text_tokens = 22
    event = maybe_evict(state, 240.0, config)
    assert event is not None
    assert event.visual_tokens_dropped == 240 * 2 * 3
    assert state.ledger.visual_tokens == 0
    assert state.ledger.context_text_tokens == 11
    assert state.ledger.generated_text_tokens == 22
    assert state.ledger.prefills == 1


def test_eviction_count_600s_stream():
    decoder = ScriptedDecoder([])
    _, metrics = run_stream(600.0, decoder, CONFIG)
    assert [e.video_time_s for e in metrics.evictions] == [240.0, 480.0]


def test_no_final_eviction_on_boundary_coincident_end():
    _, metrics = run_stream(240.0, ScriptedDecoder([]), CONFIG)
    assert metrics.evictions == []
    _, metrics = run_stream(480.0, ScriptedDecoder([]), CONFIG)
    assert [e.video_time_s for e in metrics.evictions] == [240.0]


def test_eviction_reprefills_with_retained_text():
    decoder = ScriptedDecoder([["w"] * 3] * 500)
    _, metrics = run_stream(300.0, decoder, CONFIG)
    assert len(metrics.evictions) == 1
    # initial prefill plus one re-prefill after the eviction
    assert metrics.prefills == 2
    initial, reprefill = decoder.prefills
    assert initial == (0, 0)
    assert reprefill[0] == metrics.evictions[0].text_tokens_retained
    assert reprefill[0] > 0


# --- full streams --------------------------------------------------------------------


def test_run_stream_replay_roundtrip_60s():
    transcript = make_transcript(uniform_words(120, rate=2.0))
    commentary, metrics = run_stream(60.0, replay_decoder(transcript), CONFIG)
    assert commentary.text == " ".join(w.surface for w in transcript.words)
    assert metrics.total_words == 120
    assert len(metrics.per_round) == 1 + 57


def test_run_stream_empty_manifest():
    commentary, metrics = run_stream([], ScriptedDecoder([]), CONFIG)
    assert commentary.words == [] and metrics.per_round == []
    assert metrics.prefills == 0


def test_visual_token_bound_traced():
    config = StreamConfig(visual_tokens_per_frame=10)
    state = StreamState()
    state.next_eviction_boundary_s = config.visual_window_s
    decoder = ScriptedDecoder([])
    rounds = plan_rounds(480.0, config)
    peak = 0
    for i, rnd in enumerate(rounds):
        step_round(state, rnd, decoder, config)
        peak = max(peak, state.ledger.visual_tokens)
        assert state.ledger.visual_tokens <= config.max_visual_tokens
        if i < len(rounds) - 1:
            maybe_evict(state, rnd.t1_s, config)
    assert peak <= 4800


def test_causality_of_availability():
    rng = random.Random(43)
    for _ in range(20):
        clip = random_clip(rng, min_words=5, max_words=120)
        transcript = make_transcript(clip.words)
        duration = grid_aligned_span(clip.end_s, InterleavePolicy())
        commentary, _ = run_stream(duration, replay_decoder(transcript), CONFIG)
        ends = {w.surface: w.end_s for w in transcript.words}
        for emitted in commentary.words:
            assert emitted.available_at_s >= ends[emitted.surface] - 1e-9


def test_manifest_duration():
    frames = [i * 0.5 for i in range(120)]  # 60s at 2 FPS
    assert manifest_duration(frames, CONFIG) == pytest.approx(60.0)
    with pytest.raises(ValueError):
        manifest_duration([1.0, 0.5], CONFIG)
    assert manifest_duration([], CONFIG) == 0.0


def test_text_counts_nondecreasing_across_evictions():
    decoder = ScriptedDecoder([["x", "y"]] * 1000)
    state = StreamState()
    state.next_eviction_boundary_s = CONFIG.visual_window_s
    previous = 0
    rounds = plan_rounds(700.0, CONFIG)
    for i, rnd in enumerate(rounds):
        step_round(state, rnd, decoder, CONFIG)
        assert state.ledger.generated_text_tokens >= previous
        previous = state.ledger.generated_text_tokens
        if i < len(rounds) - 1:
            maybe_evict(state, rnd.t1_s, CONFIG)
    assert len(state.ledger.evictions) == 2


# --- replay decoder -------------------------------------------------------------------


def test_replay_first_round_collects_early_words():
    transcript = make_transcript(
        [TimedWord("a", 0.0, 0.4), TimedWord("b", 0.5, 1.2), TimedWord("c", 1.3, 1.6)]
    )
    decoder = replay_decoder(transcript)
    words, _ = decoder.decode_round(6)  # first 3s round
    assert words == ["a", "b", "c"]


def test_replay_silent_round():
    transcript = make_transcript([TimedWord("late", 5.0, 5.5)])
    decoder = replay_decoder(transcript)
    words, _ = decoder.decode_round(6)
    assert words == []


def test_scheduler_interleaver_agreement():
    rng = random.Random(47)
    policy = InterleavePolicy()
    for _ in range(40):
        clip = random_clip(rng, min_words=2, max_words=150)
        seq = emit_pretrain_record(clip, "", policy)
        transcript = make_transcript(clip.words)
        duration = seq.steps[-1].t1_s
        state = StreamState()
        state.next_eviction_boundary_s = CONFIG.visual_window_s
        decoder = replay_decoder(transcript)
        per_round = [
            step_round(state, rnd, decoder, CONFIG).words for rnd in plan_rounds(duration, CONFIG)
        ]
        per_step = [[w.surface for w in step.words] for step in seq.steps]
        assert per_round == per_step


def test_scheduler_agrees_after_merging_uniform_head():
    # uniform interleaving splits the 3s head into unit steps; merging the
    # first three steps must reproduce the scheduler's first round
    clip = make_clip(uniform_words(20, rate=2.0))
    uniform_seq = emit_pretrain_record(clip, "", InterleavePolicy(first_interval_s=1.0))
    transcript = make_transcript(clip.words)
    commentary, _ = run_stream(10.0, replay_decoder(transcript), CONFIG)
    merged_head = [w.surface for step in uniform_seq.steps[:3] for w in step.words]
    first_round_words = [w.surface for w in commentary.words if w.available_at_s == 3.0]
    assert first_round_words == merged_head


# --- config validation ---------------------------------------------------------------------


def test_stream_config_invariants():
    with pytest.raises(ConfigError):
        StreamConfig(visual_window_s=0.0)
    with pytest.raises(ConfigError):
        StreamConfig(visual_window_s=240.5)
    with pytest.raises(ConfigError):
        StreamConfig(visual_tokens_per_frame=0)
    with pytest.raises(ConfigError):
        StreamConfig(first_round_s=2.5)


# --- external decoder protocol ---------------------------------------------------

DECODER_CHILD = '''
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    assert req["op"] == "decode"
    words = [f"t{req['round_t1_ms']}"] if req["round_t1_ms"] <= 4000 else []
    out = {"id": req["id"], "words": words, "cost": 0.5 * req["frames"]}
    sys.stdout.write(json.dumps(out) + "\\n")
    sys.stdout.flush()
'''


def test_external_decoder_protocol():
    import sys as _sys

    from streamlace.scheduler import ExternalProcessDecoder

    with ExternalProcessDecoder([_sys.executable, "-c", DECODER_CHILD], fps=2.0) as decoder:
        commentary, metrics = run_stream(5.0, decoder, CONFIG)
    assert commentary.text == "t3000 t4000"
    assert [m.latency_units for m in metrics.per_round] == [3.0, 1.0, 1.0]
    assert [w.available_at_s for w in commentary.words] == [3.0, 4.0]


def test_external_decoder_malformed_response():
    import sys as _sys

    from streamlace.scheduler import ExternalProcessDecoder

    child = 'import json,sys\nfor line in sys.stdin:\n    req=json.loads(line)\n    sys.stdout.write(json.dumps({"id": req["id"], "nope": 1}) + "\\n")\n    sys.stdout.flush()\n'
    with ExternalProcessDecoder([_sys.executable, "-c", child], fps=2.0) as decoder:
        with pytest.raises(DecoderFailure):
            run_stream(5.0, decoder, CONFIG)


def test_wall_clock_adapter_reports_elapsed_time():
    from streamlace.scheduler import WallClockDecoder

    ticks = iter([10.0, 10.25, 11.0, 11.05])
    adapter = WallClockDecoder(ScriptedDecoder([["a"], []]), clock=lambda: next(ticks))
    words, latency = adapter.decode_round(6)
    assert words == ["a"] and latency == 0.25
    words, latency = adapter.decode_round(2)
    assert words == [] and latency == pytest.approx(0.05)
