"""Command-line pipeline over JSON Lines records.

Stages are pure record transforms: ``ingest`` parses captions into word
transcripts, ``clip`` segments them, ``gate`` applies retention rules,
``rank``/``build`` produce training sequences, ``stream-sim`` replays a
transcript through the round scheduler, ``arena`` computes pairwise win
rates, and ``stats`` summarizes clip records.

Records are partitioned into shards by a stable hash of the video id,
processed shard by shard, and merged back in canonical order, so the shard
count never changes output bytes. Errors exit with a distinct status per
class and a machine-readable JSON reason on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import arena as arena_mod
from . import records as rec
from .clips import SegmentationReport, retention_reason, segment_by_gaps
from .config import Mode, PipelineConfig, load_config
from .decisions import GateDecision
from .errors import (
    ConfigError,
    DecoderFailure,
    DetectorFailure,
    EmptyGroundTruth,
    InvertedSpan,
    JudgeFailure,
    MalformedTimestamp,
    MissingPrompt,
    NoValidJudgments,
    SchemaViolation,
    ScorerFailure,
)
from .gates import (
    ExternalProcessLangDetector,
    ExternalProcessScorer,
    TrigramLanguageDetector,
    UnigramNllScorer,
    distinct_word_count,
    gate_category,
    gate_language,
    gate_perplexity,
    gate_talking_head,
    select_top,
)
from .interleave import build_context, emit_pretrain_record, emit_sft_record
from .scheduler import (
    ExternalProcessDecoder,
    StreamConfig,
    manifest_duration,
    replay_decoder,
    run_stream,
)
from .stats import compute_stats
from .transcript import (
    CaptionFormat,
    DroppedWord,
    TimingSource,
    approximate_word_timing,
    normalize_transcript,
    parse_segment_captions,
    parse_word_aligned_record,
    validate_meta,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_SCHEMA = 3
EXIT_MISSING_INPUT = 4
EXIT_EXTERNAL = 5

_SCHEMA_ERRORS = (
    SchemaViolation,
    MalformedTimestamp,
    InvertedSpan,
    MissingPrompt,
    EmptyGroundTruth,
    NoValidJudgments,
)
_EXTERNAL_ERRORS = (ScorerFailure, DetectorFailure, JudgeFailure, DecoderFailure)


def _fail(kind: str, detail: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "detail": detail}) + "\n")


def _status(message: str) -> None:
    sys.stderr.write(message + "\n")


def _write_report(path, payload: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _pipeline_config(args) -> PipelineConfig:
    overrides: dict[str, str] = {}
    if getattr(args, "shards", None) is not None:
        overrides["shard_count"] = str(args.shards)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    mode = Mode(args.mode) if getattr(args, "mode", None) else None
    return load_config(mode=mode, config_path=getattr(args, "config", None), overrides=overrides)


def _merge_sorted(keyed_records: list[tuple[tuple, dict]]) -> list[dict]:
    keyed_records.sort(key=lambda pair: pair[0])
    return [record for _, record in keyed_records]


# --- ingest -----------------------------------------------------------------


def cmd_ingest(args) -> int:
    fmt = CaptionFormat(args.format) if args.format != "word_aligned" else None
    keyed: list[tuple[tuple, dict]] = []
    dropped: list[DroppedWord] = []
    drop_report: list[dict] = []
    n_videos = 0
    for path in args.inputs:
        text = Path(path).read_text(encoding="utf-8")
        if fmt is None:
            for line in text.splitlines():
                if not line.strip():
                    continue
                video_id, words = parse_word_aligned_record(line)
                n_videos += 1
                _ingest_one(video_id, words, TimingSource.WORD_ALIGNED, keyed, dropped, drop_report)
        else:
            video_id = Path(path).stem
            segments = parse_segment_captions(text, fmt)
            words = [w for seg in segments for w in approximate_word_timing(seg)]
            n_videos += 1
            _ingest_one(
                video_id, words, TimingSource.SEGMENT_APPROXIMATED, keyed, dropped, drop_report
            )
    out_records = _merge_sorted(keyed)
    rec.write_jsonl(args.out, out_records)
    _write_report(args.report, {"videos": n_videos, "dropped_words": drop_report})
    _status(f"ingest: {n_videos} videos, {len(dropped)} words dropped during normalization")
    return EXIT_OK


def _ingest_one(video_id, words, source, keyed, dropped, drop_report) -> None:
    before = len(dropped)
    transcript = normalize_transcript(words, video_id, source, dropped)
    for item in dropped[before:]:
        drop_report.append(
            {
                "video_id": video_id,
                "w": item.word.surface,
                "s_ms": rec.ms(item.word.start_s),
                "e_ms": rec.ms(item.word.end_s),
                "reason": item.reason.value,
            }
        )
    keyed.append(((video_id,), rec.transcript_to_record(transcript)))


# --- clip -------------------------------------------------------------------


def cmd_clip(args) -> int:
    config = _pipeline_config(args)
    transcripts = list(rec.read_jsonl(args.transcripts))
    keyed: list[tuple[tuple, dict]] = []
    report = SegmentationReport()
    dropped: list[dict] = []
    for shard in rec.partition_by_shard(transcripts, config.shard_count):
        for obj in shard:
            transcript = rec.transcript_from_record(obj)
            candidates = segment_by_gaps(transcript, config.clip_policy)
            for clip in candidates:
                reason = retention_reason(clip, config.clip_policy)
                if reason is None:
                    report.kept += 1
                    keyed.append(
                        ((clip.video_id, rec.ms(clip.start_s)), rec.clip_to_record(clip))
                    )
                else:
                    report.dropped_by_reason[reason] += 1
                    dropped.append(
                        {
                            "video_id": clip.video_id,
                            "start_ms": rec.ms(clip.start_s),
                            "end_ms": rec.ms(clip.end_s),
                            "reason": reason.value,
                        }
                    )
    out_records = _merge_sorted(keyed)
    rec.write_jsonl(args.out, out_records)
    dropped.sort(key=lambda d: (d["video_id"], d["start_ms"]))
    _write_report(
        args.report,
        {
            "kept": report.kept,
            "dropped": dropped,
            "dropped_by_reason": {k.value: v for k, v in report.dropped_by_reason.items()},
        },
    )
    _status(
        f"clip: kept {report.kept} of {report.candidates} candidates "
        f"({sum(report.dropped_by_reason.values())} dropped)"
    )
    return EXIT_OK


# --- gate -------------------------------------------------------------------


def cmd_gate(args) -> int:
    config = _pipeline_config(args)
    cfg = config.gate_config
    clip_records = list(rec.read_jsonl(args.clips))
    meta_index = rec.load_meta_index(args.meta)
    th_scores = {}
    if args.talking_head:
        for obj in rec.read_jsonl(args.talking_head):
            th_scores[str(obj["video_id"])] = float(obj["confidence"])
    scorer = (
        ExternalProcessScorer(args.scorer_cmd.split(), timeout_s=args.external_timeout)
        if args.scorer_cmd
        else UnigramNllScorer()
    )
    detector = (
        ExternalProcessLangDetector(
            args.detector_cmd.split(), cfg.required_lang, timeout_s=args.external_timeout
        )
        if args.detector_cmd
        else TrigramLanguageDetector()
    )

    keyed: list[tuple[tuple, dict]] = []
    dropped: list[dict] = []
    try:
        for shard in rec.partition_by_shard(clip_records, config.shard_count):
            by_video: dict[str, list[dict]] = {}
            for obj in shard:
                by_video.setdefault(str(obj["video_id"]), []).append(obj)
            for video_id, objs in by_video.items():
                if video_id not in meta_index:
                    raise SchemaViolation(f"no metadata for video {video_id!r}")
                meta = meta_index[video_id]
                clips = [rec.clip_from_record(o) for o in objs]
                video_text = " ".join(c.text() for c in clips)
                video_gates: dict[str, GateDecision] = {
                    "meta": validate_meta(meta),
                    "category": gate_category(meta, cfg),
                    "lang": gate_language(video_text, detector, cfg),
                }
                if video_id in th_scores:
                    video_gates["talking_head"] = gate_talking_head(th_scores[video_id], cfg)
                for obj, clip in zip(objs, clips):
                    gates = dict(video_gates)
                    gates["ppl"] = gate_perplexity(clip.text(), scorer, cfg.nll_lo, cfg.nll_hi)
                    failing = next((g for g in gates.values() if not g.keep), None)
                    if failing is None:
                        gated = dict(obj)
                        gated.pop("schema_version", None)
                        gated["category"] = meta.category
                        gated["gates"] = {name: g.to_json() for name, g in gates.items()}
                        gated["schema_version"] = rec.SCHEMA_VERSION
                        keyed.append(((video_id, obj["start_ms"]), gated))
                    else:
                        dropped.append(
                            {
                                "video_id": video_id,
                                "start_ms": obj["start_ms"],
                                "reason": failing.reason.value,
                            }
                        )
    finally:
        if hasattr(scorer, "close"):
            scorer.close()
        if hasattr(detector, "close"):
            detector.close()
    out_records = _merge_sorted(keyed)
    rec.write_jsonl(args.out, out_records)
    by_reason: dict[str, int] = {}
    for item in dropped:
        by_reason[item["reason"]] = by_reason.get(item["reason"], 0) + 1
    _write_report(args.report, {"kept": len(out_records), "dropped": dropped, "dropped_by_reason": by_reason})
    _status(f"gate: kept {len(out_records)} clips, dropped {len(dropped)}")
    return EXIT_OK


# --- rank -------------------------------------------------------------------


def cmd_rank(args) -> int:
    clip_records = list(rec.read_jsonl(args.clips))

    def key(obj: dict) -> tuple:
        text = " ".join(w["w"] for w in obj["words"])
        return (-distinct_word_count(text), obj["video_id"], obj["start_ms"])

    ranked = sorted(clip_records, key=key)
    top = select_top(ranked, args.top) if args.top is not None else ranked
    rec.write_jsonl(args.out, top)
    _status(f"rank: wrote {len(top)} of {len(ranked)} clips")
    return EXIT_OK


# --- build ------------------------------------------------------------------


def cmd_build(args) -> int:
    config = _pipeline_config(args)
    policy = config.interleave_policy.uniform() if args.uniform_k else config.interleave_policy
    clip_records = list(rec.read_jsonl(args.clips))
    meta_index = rec.load_meta_index(args.meta) if args.meta else {}
    prompts: dict[str, str] = {}
    if args.prompts:
        for obj in rec.read_jsonl(args.prompts):
            prompts[str(obj["video_id"])] = str(obj["prompt"])

    keyed: list[tuple[tuple, dict]] = []
    for shard in rec.partition_by_shard(clip_records, config.shard_count):
        by_video: dict[str, list[dict]] = {}
        for obj in shard:
            by_video.setdefault(str(obj["video_id"]), []).append(obj)
        for video_id, objs in by_video.items():
            objs.sort(key=lambda o: o["start_ms"])
            prev_text: str | None = None
            for obj in objs:
                clip = rec.clip_from_record(obj)
                if config.mode is Mode.SFT:
                    if video_id not in prompts:
                        raise MissingPrompt(f"no prompt for video {video_id!r}")
                    record = emit_sft_record(clip, prompts[video_id], policy)
                else:
                    title = meta_index[video_id].title if video_id in meta_index else ""
                    try:
                        context = build_context(title, prev_text, policy.context_mode)
                    except ValueError as exc:
                        raise SchemaViolation(f"video {video_id!r}: {exc}") from exc
                    seq = emit_pretrain_record(clip, context, policy)
                    record = rec.sequence_to_record(seq, policy.context_mode)
                keyed.append(((video_id, obj["start_ms"]), record))
                prev_text = clip.text()
    out_records = _merge_sorted(keyed)
    rec.write_jsonl(args.out, out_records)
    _status(f"build: wrote {len(out_records)} sequence records ({config.mode.value} mode)")
    return EXIT_OK


# --- stream-sim ---------------------------------------------------------------


def cmd_stream_sim(args) -> int:
    config = _pipeline_config(args)
    stream_config = StreamConfig(
        fps=config.interleave_policy.fps,
        first_round_s=config.interleave_policy.first_interval_s,
        round_s=config.interleave_policy.interval_s,
        visual_window_s=args.visual_window,
        visual_tokens_per_frame=args.tokens_per_frame,
    )
    frame_times = [obj["t_ms"] / 1000.0 for obj in rec.read_jsonl(args.manifest)]
    duration = manifest_duration(frame_times, stream_config)
    if args.decoder_cmd:
        decoder = ExternalProcessDecoder(
            args.decoder_cmd.split(), fps=stream_config.fps, timeout_s=args.external_timeout
        )
    elif args.transcript:
        transcripts = [rec.transcript_from_record(o) for o in rec.read_jsonl(args.transcript)]
        if len(transcripts) != 1:
            raise SchemaViolation(
                f"stream-sim expects exactly one transcript, got {len(transcripts)}"
            )
        decoder = replay_decoder(transcripts[0], fps=stream_config.fps)
    else:
        raise ConfigError("stream-sim needs --transcript (replay) or --decoder-cmd")
    try:
        commentary, metrics = run_stream(
            duration, decoder, stream_config, context_text_tokens=args.context_tokens
        )
    finally:
        if hasattr(decoder, "close"):
            decoder.close()
    payload = {
        "commentary": {
            "text": commentary.text,
            "words": [
                {"w": w.surface, "available_at_ms": rec.ms(w.available_at_s)}
                for w in commentary.words
            ],
        },
        "metrics": {
            "rounds": [
                {"t_ms": rec.ms(m.video_time_s), "words": m.words_emitted, "latency": m.latency_units}
                for m in metrics.per_round
            ],
            "max_latency": metrics.max_latency,
            "mean_latency": metrics.mean_latency,
            "total_words": metrics.total_words,
            "evictions": [
                {
                    "t_ms": rec.ms(e.video_time_s),
                    "visual_tokens_dropped": e.visual_tokens_dropped,
                    "text_tokens_retained": e.text_tokens_retained,
                }
                for e in metrics.evictions
            ],
            "prefills": metrics.prefills,
        },
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _status(
        f"stream-sim: {len(metrics.per_round)} rounds, {metrics.total_words} words, "
        f"{len(metrics.evictions)} evictions"
    )
    return EXIT_OK


# --- arena --------------------------------------------------------------------


def cmd_arena(args) -> int:
    events = {}
    for obj in rec.read_jsonl(args.events):
        events[str(obj["event_id"])] = arena_mod.EventRecord(
            event_id=str(obj["event_id"]),
            title=str(obj.get("title", "")),
            preceding_cc=str(obj.get("preceding_cc", "")),
            ground_truth_cc=str(obj["ground_truth_cc"]),
            duration_s=float(obj.get("duration_s", 0.0)),
        )
    preds = {str(o["event_id"]): str(o["text"]) for o in rec.read_jsonl(args.preds)}
    baseline = {str(o["event_id"]): str(o["text"]) for o in rec.read_jsonl(args.baseline)}
    judge = _make_judge(args)
    results = []
    match_records = []
    for event_id in sorted(events):
        if event_id not in preds or event_id not in baseline:
            raise SchemaViolation(f"missing prediction for event {event_id!r}")
        result = arena_mod.run_match(
            preds[event_id],
            baseline[event_id],
            events[event_id].ground_truth_cc,
            judge,
            event_id=event_id,
            retries=args.retries,
        )
        results.append(result)
        match_records.append(
            {
                "event_id": event_id,
                "outcome": result.outcome.value,
                "favorable_judgments": result.favorable_judgments,
                "verdict_forward": result.verdict_forward.kind.value,
                "verdict_swapped": result.verdict_swapped.kind.value,
            }
        )
    report = arena_mod.win_rate(results, model_id=args.model_id, opponent_id=args.baseline_id)
    Path(args.out).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    if args.matches:
        rec.write_jsonl(args.matches, match_records)
    _status(f"arena: win rate {report.win_rate:.3f} over {report.n_events} events")
    return EXIT_OK


def _make_judge(args):
    if args.judge == "lexical":
        return arena_mod.lexical_judge()
    if args.judge == "replay":
        if not args.judge_file:
            raise ConfigError("--judge replay requires --judge-file")
        return arena_mod.ReplayJudge.from_file(args.judge_file)
    if args.judge == "endpoint":
        if not args.judge_url or not args.judge_model:
            raise ConfigError("--judge endpoint requires --judge-url and --judge-model")
        return arena_mod.EndpointJudge(args.judge_url, args.judge_model)
    raise ConfigError(f"unknown judge kind: {args.judge!r}")


# --- stats --------------------------------------------------------------------


def cmd_stats(args) -> int:
    report = compute_stats(rec.read_jsonl(args.records))
    Path(args.out).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    _status(f"stats: {report.n_clips} clips, {report.total_hours:.2f} hours")
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamlace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--mode", choices=[m.value for m in Mode], help="pipeline mode preset")
    common.add_argument("--out", required=True, help="output path")
    common.add_argument("--shards", type=int, help="shard count for deterministic partitioning")
    common.add_argument("--seed", type=int, help="seed recorded into the config")
    common.add_argument("--report", help="write a JSON drop/keep report here")

    p = sub.add_parser("ingest", parents=[common], help="parse captions into word transcripts")
    p.add_argument("inputs", nargs="+", help="caption files (one video each) or word-aligned JSONL")
    p.add_argument(
        "--format",
        default=CaptionFormat.CUE_LIST.value,
        choices=[CaptionFormat.CUE_LIST.value, CaptionFormat.SEGMENT_JSON.value, "word_aligned"],
    )
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("clip", parents=[common], help="segment transcripts into clips")
    p.add_argument("--transcripts", required=True)
    p.set_defaults(func=cmd_clip)

    p = sub.add_parser("gate", parents=[common], help="apply retention gates to clips")
    p.add_argument("--clips", required=True)
    p.add_argument("--meta", required=True, help="video metadata JSONL")
    p.add_argument("--talking-head", help="per-video talking-head confidences JSONL")
    p.add_argument("--scorer-cmd", help="external text scorer command (NDJSON protocol)")
    p.add_argument("--detector-cmd", help="external language detector command")
    p.add_argument("--external-timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_gate)

    p = sub.add_parser("rank", parents=[common], help="rank clips by distinct word count")
    p.add_argument("--clips", required=True)
    p.add_argument("--top", type=int, help="keep only the top N clips")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("build", parents=[common], help="emit interleaved training sequences")
    p.add_argument("--clips", required=True)
    p.add_argument("--meta", help="video metadata JSONL (for titles)")
    p.add_argument("--prompts", help="per-video prompts JSONL (SFT mode)")
    p.add_argument("--uniform-k", action="store_true", help="uniform intervals (no long first step)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("stream-sim", parents=[common], help="simulate a streaming session")
    p.add_argument("--manifest", required=True, help="frame manifest JSONL")
    p.add_argument("--transcript", help="ground-truth transcript JSONL (replay decoder)")
    p.add_argument("--decoder-cmd", help="external decoder command (NDJSON protocol)")
    p.add_argument("--external-timeout", type=float, default=30.0)
    p.add_argument("--visual-window", type=float, default=240.0)
    p.add_argument("--tokens-per-frame", type=int, default=1)
    p.add_argument("--context-tokens", type=int, default=0)
    p.set_defaults(func=cmd_stream_sim)

    p = sub.add_parser("arena", parents=[common], help="pairwise win-rate evaluation")
    p.add_argument("--events", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--judge", default="lexical", choices=["lexical", "replay", "endpoint"])
    p.add_argument("--judge-file", help="recorded responses for --judge replay")
    p.add_argument("--judge-url", help="endpoint URL for --judge endpoint")
    p.add_argument("--judge-model", help="model id for --judge endpoint")
    p.add_argument("--retries", type=int, default=2)
    p.add_argument("--model-id", default="tested")
    p.add_argument("--baseline-id", default="baseline")
    p.add_argument("--matches", help="write per-match records here")
    p.set_defaults(func=cmd_arena)

    p = sub.add_parser("stats", parents=[common], help="summarize clip records")
    p.add_argument("--records", required=True)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _fail("ConfigError", str(exc))
        return EXIT_CONFIG
    except _SCHEMA_ERRORS as exc:
        _fail(type(exc).__name__, str(exc))
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        _fail("MissingInput", str(exc))
        return EXIT_MISSING_INPUT
    except _EXTERNAL_ERRORS as exc:
        _fail(type(exc).__name__, str(exc))
        return EXIT_EXTERNAL
    except (KeyError, ValueError) as exc:
        _fail(type(exc).__name__, str(exc))
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
