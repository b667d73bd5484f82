"""Run the pairwise win-rate protocol over the bundled event fixtures.

Every event is judged twice with the candidate positions swapped, which is
what neutralizes a judge's positional bias: a judge that always prefers
slot A hands each side one judgment, scoring 0.5. The deterministic lexical
judge (token-overlap F1 against the reference) keeps this demo offline; the
same protocol drives an endpoint judge in production.

    python demos/run_winrate_arena.py
"""

import json
from pathlib import Path

from streamlace.arena import (
    Mcq,
    QuestionType,
    build_judge_prompt,
    lexical_judge,
    mcq_accuracy,
    run_match,
    win_rate,
)

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def load_jsonl(name):
    return [json.loads(line) for line in (FIXTURES / name).read_text().splitlines()]


events = {r["event_id"]: r for r in load_jsonl("arena_events.jsonl")}
tested = {r["event_id"]: r["text"] for r in load_jsonl("arena_preds.jsonl")}
baseline = {r["event_id"]: r["text"] for r in load_jsonl("arena_baseline.jsonl")}

# ---------------------------------------------------------------------------
# 1. The judge prompt, instantiated once for a look at the format.
# ---------------------------------------------------------------------------
first = events["ev-001"]
prompt = build_judge_prompt(tested["ev-001"], baseline["ev-001"], first["ground_truth_cc"])
print(prompt[: prompt.index("---Commentary A---")])
print("... sections for A, B, and the human reference follow ...\n")

# ---------------------------------------------------------------------------
# 2. Run every match: two judgments each, positions swapped.
# ---------------------------------------------------------------------------
judge = lexical_judge()
results = []
for event_id in sorted(events):
    result = run_match(
        tested[event_id],
        baseline[event_id],
        events[event_id]["ground_truth_cc"],
        judge,
        event_id=event_id,
    )
    results.append(result)
    print(
        f"{event_id}: forward={result.verdict_forward.kind.value:7s} "
        f"swapped={result.verdict_swapped.kind.value:7s} -> {result.outcome.value}"
    )

report = win_rate(results, model_id="streaming-model", opponent_id="caption-model")
print(f"\nwin rate: {report.win_rate:.3f} ({report.favorable}/{report.n_judgments} judgments)")
print(f"outcomes: {report.by_outcome}")

# ---------------------------------------------------------------------------
# 3. The QA track aggregates already-made MCQ choices into sliced accuracy.
# ---------------------------------------------------------------------------
mcqs = [
    Mcq("q1", "Who scored?", ("home striker", "keeper", "referee", "bench"), 0, QuestionType.WHO),
    Mcq("q2", "When did play restart?", ("right away", "after a delay", "half time", "never"), 0, QuestionType.WHEN),
    Mcq("q3", "What saved the shot?", ("a dive", "the post", "a block", "offside"), 0, QuestionType.WHAT, needs_ocr=True),
]
answers = {"q1": 0, "q2": 1, "q3": 0}
qa = mcq_accuracy(answers, mcqs)
print(f"\nMCQ overall: {qa.overall:.2f}, by type: {qa.by_qtype}, OCR slice: {qa.ocr}")
