"""Show how a clip becomes a densely interleaved frame/word sequence.

A clip's words are assigned to time intervals by their end timestamps; each
interval contributes its frame placeholders followed by the words it owns,
terminated with the " ..." marker. Silent intervals carry the marker alone,
which is what lets a model distinguish a pause from the end of the stream.

    python demos/build_interleaved_sequences.py
"""

from streamlace.clips import Clip
from streamlace.interleave import (
    ContextMode,
    InterleavePolicy,
    build_context,
    emit_pretrain_record,
    emit_sft_record,
    reconstruct_transcript,
    serialize_sequence,
)
from streamlace.transcript import TimedWord

# A 10-second clip: a burst of speech, a pause, then two more words.
words = [
    TimedWord("the", 0.2, 0.5),
    TimedWord("pass", 0.5, 0.9),
    TimedWord("splits", 0.9, 1.4),
    TimedWord("the", 1.4, 1.6),
    TimedWord("defense", 1.6, 2.3),
    TimedWord("wide", 2.3, 2.8),
    TimedWord("open", 2.8, 3.4),
    TimedWord("goal", 7.6, 8.1),
    TimedWord("incoming", 8.1, 8.9),
]
clip = Clip(video_id="demo", start_s=0.0, end_s=10.0, words=words)

policy = InterleavePolicy()  # 2 FPS, 3s first interval then 1s intervals

# ---------------------------------------------------------------------------
# 1. Context assembly: the unsupervised prefix before the first frame.
# ---------------------------------------------------------------------------
title = "Five Classic Counter Attacks"
previous_text = "they win the ball back in midfield"
for mode in ContextMode:
    rendered = build_context(title, previous_text, mode)
    print(f"{mode.value:15s} -> {rendered!r}")

# ---------------------------------------------------------------------------
# 2. Emit the training sequence and inspect its steps.
# ---------------------------------------------------------------------------
seq = emit_pretrain_record(clip, build_context(title, None, ContextMode.TITLE_OR_PREV), policy)
print(f"\ncontext: {seq.context!r}")
for step in seq.steps:
    marker = "silent" if not step.words else f"{len(step.words)} words"
    print(f"  [{step.t0_s:4.1f},{step.t1_s:4.1f}) {step.frame_slots} frames  {marker:9s} {step.text!r}")

# The serialized form interleaves frame placeholders with the step text;
# role spans mark what is context, frames, and supervised words.
rendered = serialize_sequence(seq)
print(f"\nserialized length: {len(rendered)} chars in {len(seq.role_spans)} role spans")
print("first 120 chars:", rendered[:120])

# ---------------------------------------------------------------------------
# 3. The sequence inverts back to the original transcript text.
# ---------------------------------------------------------------------------
assert reconstruct_transcript(seq) == clip.text()
print("\nround-trip ok:", reconstruct_transcript(seq))

# ---------------------------------------------------------------------------
# 4. Instruction-tuning records swap the context for a user prompt.
# ---------------------------------------------------------------------------
record = emit_sft_record(clip, "Commentate this match in real time.", policy)
print(f"\nSFT record: prompt={record['prompt']!r}, rounds={len(record['rounds'])}")
print("first round:", record["rounds"][0])
