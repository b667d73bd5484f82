from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from streamlace.cli import (
    EXIT_CONFIG,
    EXIT_MISSING_INPUT,
    EXIT_OK,
    EXIT_SCHEMA,
    main,
)

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"
CAPTIONS = sorted(str(p) for p in (FIXTURES / "captions").glob("*.cues"))


def run_pipeline(tmp_path: Path, shards: int = 1) -> dict[str, Path]:
    out = {
        "transcripts": tmp_path / "transcripts.jsonl",
        "clips": tmp_path / "clips.jsonl",
        "gated": tmp_path / "gated.jsonl",
        "sequences": tmp_path / "sequences.jsonl",
    }
    assert main(["ingest", *CAPTIONS, "--out", str(out["transcripts"])]) == EXIT_OK
    assert (
        main(
            [
                "clip",
                "--transcripts",
                str(out["transcripts"]),
                "--shards",
                str(shards),
                "--out",
                str(out["clips"]),
            ]
        )
        == EXIT_OK
    )
    assert (
        main(
            [
                "gate",
                "--clips",
                str(out["clips"]),
                "--meta",
                str(FIXTURES / "meta.jsonl"),
                "--talking-head",
                str(FIXTURES / "talking_head.jsonl"),
                "--shards",
                str(shards),
                "--out",
                str(out["gated"]),
            ]
        )
        == EXIT_OK
    )
    assert (
        main(
            [
                "build",
                "--clips",
                str(out["gated"]),
                "--meta",
                str(FIXTURES / "meta.jsonl"),
                "--shards",
                str(shards),
                "--out",
                str(out["sequences"]),
            ]
        )
        == EXIT_OK
    )
    return out


def test_pipeline_matches_golden(tmp_path):
    out = run_pipeline(tmp_path)
    for name, path in out.items():
        assert path.read_bytes() == (GOLDEN / f"{name}.jsonl").read_bytes(), name


@pytest.mark.parametrize("shards", [1, 4, 16])
def test_pipeline_byte_identical_across_shard_counts(tmp_path, shards):
    out = run_pipeline(tmp_path, shards=shards)
    for name, path in out.items():
        assert path.read_bytes() == (GOLDEN / f"{name}.jsonl").read_bytes(), name


def test_rank_command(tmp_path):
    run_pipeline(tmp_path)
    ranked = tmp_path / "ranked.jsonl"
    assert (
        main(
            [
                "rank",
                "--clips",
                str(tmp_path / "gated.jsonl"),
                "--top",
                "2",
                "--out",
                str(ranked),
            ]
        )
        == EXIT_OK
    )
    records = [json.loads(l) for l in ranked.read_text().splitlines()]
    assert len(records) == 2
    # the 100s marathon clip has the largest distinct vocabulary
    assert records[0]["video_id"] == "marathon-a1" and records[0]["start_ms"] == 0


def test_sft_build_requires_prompts(tmp_path):
    run_pipeline(tmp_path)
    code = main(
        [
            "build",
            "--mode",
            "sft",
            "--clips",
            str(tmp_path / "gated.jsonl"),
            "--out",
            str(tmp_path / "sft.jsonl"),
        ]
    )
    assert code == EXIT_SCHEMA


def test_sft_build_with_prompts(tmp_path):
    run_pipeline(tmp_path)
    prompts = tmp_path / "prompts.jsonl"
    prompts.write_text(
        "\n".join(
            json.dumps({"video_id": vid, "prompt": "Narrate the video as it plays."})
            for vid in ("marathon-a1", "workshop-b2")
        )
        + "\n",
        encoding="utf-8",
    )
    out = tmp_path / "sft.jsonl"
    assert (
        main(
            [
                "build",
                "--mode",
                "sft",
                "--clips",
                str(tmp_path / "gated.jsonl"),
                "--prompts",
                str(prompts),
                "--out",
                str(out),
            ]
        )
        == EXIT_OK
    )
    records = [json.loads(l) for l in out.read_text().splitlines()]
    assert all(r["prompt"] == "Narrate the video as it plays." for r in records)
    assert all(r["rounds"][0]["frames"] == 6 for r in records)


def test_stream_sim_matches_golden(tmp_path):
    out = tmp_path / "stream.json"
    assert (
        main(
            [
                "stream-sim",
                "--manifest",
                str(FIXTURES / "manifest.jsonl"),
                "--transcript",
                str(FIXTURES / "a1_transcript.jsonl"),
                "--out",
                str(out),
            ]
        )
        == EXIT_OK
    )
    assert json.loads(out.read_text()) == json.loads((GOLDEN / "stream.json").read_text())


def test_arena_matches_golden(tmp_path):
    out = tmp_path / "arena.json"
    assert (
        main(
            [
                "arena",
                "--events",
                str(FIXTURES / "arena_events.jsonl"),
                "--preds",
                str(FIXTURES / "arena_preds.jsonl"),
                "--baseline",
                str(FIXTURES / "arena_baseline.jsonl"),
                "--judge",
                "lexical",
                "--model-id",
                "streaming-model",
                "--baseline-id",
                "caption-model",
                "--out",
                str(out),
            ]
        )
        == EXIT_OK
    )
    report = json.loads(out.read_text())
    assert report == json.loads((GOLDEN / "arena.json").read_text())
    assert report["win_rate"] == 0.625


def test_stats_matches_golden(tmp_path):
    run_pipeline(tmp_path)
    out = tmp_path / "stats.json"
    assert main(["stats", "--records", str(tmp_path / "gated.jsonl"), "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text()) == json.loads((GOLDEN / "stats.json").read_text())


def test_stats_empty_input_exit_zero(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("", encoding="utf-8")
    out = tmp_path / "stats.json"
    assert main(["stats", "--records", str(empty), "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["n_clips"] == 0


def test_word_aligned_ingest(tmp_path):
    source = tmp_path / "aligned.jsonl"
    source.write_text(
        json.dumps(
            {
                "video_id": "wa-1",
                "words": [
                    {"w": "Hello", "s": 0.1, "e": 0.4},
                    {"w": "there,", "s": 0.5, "e": 0.9},
                ],
            }
        )
        + "\n",
        encoding="utf-8",
    )
    out = tmp_path / "transcripts.jsonl"
    assert main(["ingest", str(source), "--format", "word_aligned", "--out", str(out)]) == EXIT_OK
    record = json.loads(out.read_text().splitlines()[0])
    assert record["timing_source"] == "word_aligned"
    assert record["words"][0] == {"w": "Hello", "s_ms": 100, "e_ms": 400}


# --- error paths ----------------------------------------------------------------


def test_config_error_exit_code(tmp_path, capsys):
    code = main(
        [
            "clip",
            "--transcripts",
            str(GOLDEN / "transcripts.jsonl"),
            "--config",
            _bad_config(tmp_path),
            "--out",
            str(tmp_path / "x.jsonl"),
        ]
    )
    assert code == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert err["error"] == "ConfigError"


def _bad_config(tmp_path) -> str:
    path = tmp_path / "bad.cfg"
    path.write_text("min_len_s = 300\nmax_len_s = 240\n", encoding="utf-8")
    return str(path)


def test_missing_input_exit_code(tmp_path, capsys):
    code = main(["clip", "--transcripts", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "x")])
    assert code == EXIT_MISSING_INPUT
    err = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert err["error"] == "MissingInput"


def test_schema_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n", encoding="utf-8")
    code = main(["clip", "--transcripts", str(bad), "--out", str(tmp_path / "x")])
    assert code == EXIT_SCHEMA


def test_gate_missing_meta_is_schema_error(tmp_path, capsys):
    run_pipeline(tmp_path)
    partial_meta = tmp_path / "partial_meta.jsonl"
    partial_meta.write_text(
        json.dumps(
            {
                "video_id": "marathon-a1",
                "title": "t",
                "duration_s": 300.0,
                "category": "Sports",
                "language_tag": "en",
                "height": 1080,
            }
        )
        + "\n",
        encoding="utf-8",
    )
    code = main(
        [
            "gate",
            "--clips",
            str(tmp_path / "clips.jsonl"),
            "--meta",
            str(partial_meta),
            "--out",
            str(tmp_path / "g.jsonl"),
        ]
    )
    assert code == EXIT_SCHEMA


def test_console_entrypoint_subprocess(tmp_path):
    result = subprocess.run(
        [
            sys.executable,
            "-m",
            "streamlace.cli",
            "stats",
            "--records",
            str(GOLDEN / "gated.jsonl"),
            "--out",
            str(tmp_path / "s.json"),
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "stats:" in result.stderr


def test_build_without_meta_is_schema_error(tmp_path, capsys):
    run_pipeline(tmp_path)
    code = main(
        [
            "build",
            "--clips",
            str(tmp_path / "gated.jsonl"),
            "--out",
            str(tmp_path / "seq.jsonl"),
        ]
    )
    assert code == EXIT_SCHEMA  # title-or-prev context needs a title for first clips
    err = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert "video" in err["detail"]


DECODER_CHILD = (
    "import json, sys\n"
    "for line in sys.stdin:\n"
    "    req = json.loads(line)\n"
    "    out = {'id': req['id'], 'words': ['tick'], 'cost': 0.25}\n"
    "    sys.stdout.write(json.dumps(out) + '\\n')\n"
    "    sys.stdout.flush()\n"
)


def test_stream_sim_external_decoder_via_script(tmp_path):
    script = tmp_path / "decoder.py"
    script.write_text(DECODER_CHILD, encoding="utf-8")
    out = tmp_path / "stream.json"
    code = main(
        [
            "stream-sim",
            "--manifest",
            str(FIXTURES / "manifest.jsonl"),
            "--decoder-cmd",
            f"{sys.executable} {script}",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["commentary"]["words"][0]["w"] == "tick"
    assert len(payload["metrics"]["rounds"]) == 58  # 60s manifest
