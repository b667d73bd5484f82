"""streamlace: video-ASR curation, frame/word interleaving, streaming
schedule simulation, and pairwise win-rate evaluation."""

from .clips import Clip, ClipPolicy, SegmentationReport, enforce_sentence_start, filter_clips, segment_by_gaps, speech_rate
from .config import Mode, PipelineConfig, load_config
from .decisions import DropReason, GateDecision
from .gates import (
    ExternalProcessLangDetector,
    ExternalProcessScorer,
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
from .interleave import (
    ContextMode,
    InterleavePolicy,
    InterleavedSequence,
    Role,
    TimeStep,
    assign_words,
    build_context,
    build_intervals,
    emit_pretrain_record,
    emit_sft_record,
    reconstruct_transcript,
    serialize_sequence,
)
from .scheduler import (
    Commentary,
    ExternalProcessDecoder,
    KvLedger,
    StreamConfig,
    StreamMetrics,
    WallClockDecoder,
    maybe_evict,
    plan_rounds,
    replay_decoder,
    run_stream,
    step_round,
)
from .arena import (
    EventRecord,
    MatchOutcome,
    MatchResult,
    Mcq,
    QuestionType,
    WinRateReport,
    build_judge_prompt,
    lexical_judge,
    mcq_accuracy,
    parse_verdict,
    run_match,
    win_rate,
)
from .transcript import (
    MetaConstraints,
    TimedWord,
    TimingSource,
    TranscriptSegment,
    VideoMeta,
    WordTranscript,
    approximate_word_timing,
    normalize_transcript,
    parse_segment_captions,
    parse_word_aligned,
    validate_meta,
)

__version__ = "0.1.0"
