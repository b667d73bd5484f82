"""Walk a small caption corpus through the full curation path.

Shows each stage of the data pipeline in order: caption parsing, word-level
timing approximation, gap-based clip segmentation, retention filtering, the
text/language/visual gates, and informativeness ranking. Run it from the
repository root:

    python demos/curate_pretrain_corpus.py
"""

from pathlib import Path

from streamlace.clips import ClipPolicy, filter_clips, segment_by_gaps, speech_rate
from streamlace.gates import (
    GateConfig,
    TrigramLanguageDetector,
    UnigramNllScorer,
    distinct_word_count,
    gate_category,
    gate_language,
    gate_perplexity,
    gate_talking_head,
    rank_informativeness,
    select_top,
)
from streamlace.records import load_meta_index
from streamlace.transcript import (
    approximate_word_timing,
    normalize_transcript,
    parse_segment_captions,
    validate_meta,
)

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

# ---------------------------------------------------------------------------
# 1. Parse segment captions and spread each cue's duration over its words.
# ---------------------------------------------------------------------------
transcripts = {}
for path in sorted((FIXTURES / "captions").glob("*.cues")):
    segments = parse_segment_captions(path.read_text(encoding="utf-8"))
    words = [w for seg in segments for w in approximate_word_timing(seg)]
    transcripts[path.stem] = normalize_transcript(words, path.stem)
    print(f"{path.stem}: {len(segments)} cues -> {len(words)} timed words")

# ---------------------------------------------------------------------------
# 2. Segment on silence gaps (>3s) and apply length/speech-rate retention.
# ---------------------------------------------------------------------------
policy = ClipPolicy()  # 3s gap split, 30..240s clips, 1..4 words/sec
all_clips = []
for video_id, transcript in transcripts.items():
    candidates = segment_by_gaps(transcript, policy)
    kept, report = filter_clips(candidates, policy)
    all_clips.extend(kept)
    drops = ", ".join(f"{k.value}={v}" for k, v in report.dropped_by_reason.items()) or "none"
    print(f"{video_id}: {len(candidates)} candidates, kept {len(kept)} (drops: {drops})")
    for clip in kept:
        print(f"  [{clip.start_s:7.1f}s..{clip.end_s:7.1f}s] {speech_rate(clip):.2f} w/s")

# ---------------------------------------------------------------------------
# 3. Gates: metadata, category, language, talking-head, and text loss band.
#    The reference detector/scorer keep this demo hermetic; production runs
#    plug real models in over the external-process protocol.
# ---------------------------------------------------------------------------
cfg = GateConfig()
meta_index = load_meta_index(FIXTURES / "meta.jsonl")
scorer = UnigramNllScorer()
detector = TrigramLanguageDetector()
talking_head = {"marathon-a1": 0.05, "workshop-b2": 0.12, "vlog-c3": 0.85}

surviving = []
for clip in all_clips:
    meta = meta_index[clip.video_id]
    decisions = {
        "meta": validate_meta(meta),
        "category": gate_category(meta, cfg),
        "lang": gate_language(clip.text(), detector, cfg),
        "talking_head": gate_talking_head(talking_head[clip.video_id], cfg),
        "ppl": gate_perplexity(clip.text(), scorer, cfg.nll_lo, cfg.nll_hi),
    }
    failing = [name for name, d in decisions.items() if not d.keep]
    nll = decisions["ppl"].measured_value
    status = "kept" if not failing else f"dropped by {failing[0]} ({decisions[failing[0]].reason.value})"
    print(f"{clip.video_id} @{clip.start_s:.0f}s: nll={nll:.2f} -> {status}")
    if not failing:
        surviving.append(clip)

# ---------------------------------------------------------------------------
# 4. Rank the survivors by distinct word count and take a budget-sized subset.
# ---------------------------------------------------------------------------
ranked = rank_informativeness(surviving)
print("\nranking by distinct words:")
for clip in ranked:
    print(f"  {distinct_word_count(clip.text()):4d} distinct  {clip.video_id} @{clip.start_s:.0f}s")
top = select_top(ranked, 2)
print(f"selected top {len(top)} clips for the training subset")
