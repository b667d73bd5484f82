"""Simulate a ten-minute streaming session with KV-cache eviction.

The scheduler feeds frames round by round (3s first, then 1s) and tracks
token counts in a ledger. Every 240 seconds of video, all visual tokens are
discarded while text tokens survive, so visual memory stays bounded on
arbitrarily long streams. A replay decoder stands in for the model.

    python demos/simulate_streaming_session.py
"""

from streamlace.scheduler import (
    StreamConfig,
    StreamState,
    maybe_evict,
    plan_rounds,
    replay_decoder,
    step_round,
)
from streamlace.transcript import TimedWord, TimingSource, WordTranscript

DURATION_S = 600.0
config = StreamConfig(visual_tokens_per_frame=4)

# Synthetic ground truth: two words per second for the whole stream.
words = [
    TimedWord(f"word{i}", i * 0.5, (i + 1) * 0.5) for i in range(int(DURATION_S * 2))
]
transcript = WordTranscript("stream-demo", words, TimingSource.WORD_ALIGNED)

rounds = plan_rounds(DURATION_S, config)
print(f"{len(rounds)} rounds for {DURATION_S:.0f}s: first {rounds[0]}, then {rounds[1]}")
print(f"visual token ceiling: {config.max_visual_tokens}")

decoder = replay_decoder(transcript, fps=config.fps)
state = StreamState()
state.next_eviction_boundary_s = config.visual_window_s

peak_visual = 0
for i, rnd in enumerate(rounds):
    step_round(state, rnd, decoder, config)
    peak_visual = max(peak_visual, state.ledger.visual_tokens)
    if i < len(rounds) - 1:
        event = maybe_evict(state, rnd.t1_s, config)
        if event is not None:
            print(
                f"t={event.video_time_s:6.0f}s  evicted {event.visual_tokens_dropped} visual tokens, "
                f"kept {event.text_tokens_retained} text tokens"
            )
    if rnd.t1_s % 120 == 0:
        ledger = state.ledger
        print(
            f"t={rnd.t1_s:6.0f}s  visual={ledger.visual_tokens:5d}  "
            f"generated_text={ledger.generated_text_tokens:5d}  prefills={ledger.prefills}"
        )

metrics = state.metrics.finalize(state.ledger)
print(f"\npeak visual tokens: {peak_visual} (ceiling {config.max_visual_tokens})")
print(f"evictions: {[e.video_time_s for e in metrics.evictions]}")
print(f"total words: {metrics.total_words}, mean latency: {metrics.mean_latency:.2f} units")
print(f"commentary starts: {state.commentary.text[:60]}...")
