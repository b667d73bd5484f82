"""Pairwise commentary win-rate protocol and MCQ accuracy aggregation.

Two candidate commentaries are placed into a fixed judge prompt alongside
the human reference; the judge must answer with one of two canonical
sentences. Every pairing is judged twice with the candidate positions
swapped, which cancels positional bias: a judge that always answers "A"
contributes one favorable and one unfavorable judgment, scoring 0.5.

The judge is any callable transport returning text: a chat-completion
endpoint, a file of recorded responses for offline runs, or the hermetic
lexical judge used in tests.
"""

from __future__ import annotations

import hashlib
import json
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Protocol

from .errors import EmptyGroundTruth, JudgeFailure, NoValidJudgments

JUDGE_PROMPT_TEMPLATE = """You are an expert in video commentary.  Your task is to review two commentaries (Commentary A and Commentary B), and select the one that better aligns with the human commentary. You should consider the criteria:
1. Semantic Alignment: The commentary should convey the same meaning, details, and key points as the human commentary.
If the above criteria is not enough to judge, then consider:
2. Stylistic Consistency: The commentary should maintain a tone, word choice, and structure similar to the human commentary.
---Commentary A---
{a_pred}
----------
---Commentary B---
{b_pred}
----------
---Human Commentary---
{gt_asr}
----------
Your response should be "Commentary A is better aligned with the human commentary" or "Commentary B is better aligned with the human commentary"."""

A_WINS_SENTENCE = "Commentary A is better aligned with the human commentary"
B_WINS_SENTENCE = "Commentary B is better aligned with the human commentary"


@dataclass(slots=True)
class EventRecord:
    event_id: str
    title: str
    preceding_cc: str
    ground_truth_cc: str
    duration_s: float


class Judge(Protocol):
    def compare(self, prompt_text: str) -> str:
        """Return the judge's raw response to one comparison prompt."""


class VerdictKind(str, Enum):
    A_WINS = "a_wins"
    B_WINS = "b_wins"
    INVALID = "invalid"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    raw: str


class MatchOutcome(str, Enum):
    WIN = "win"
    LOSS = "loss"
    SPLIT = "split"


@dataclass(frozen=True)
class MatchResult:
    """Both judgments for one event: forward (tested as A) and swapped."""

    event_id: str
    verdict_forward: Verdict
    verdict_swapped: Verdict
    outcome: MatchOutcome
    favorable_judgments: int

    @property
    def invalid_judgments(self) -> int:
        return sum(
            1
            for v in (self.verdict_forward, self.verdict_swapped)
            if v.kind is VerdictKind.INVALID
        )


@dataclass(frozen=True)
class WinRateReport:
    model_id: str
    opponent_id: str
    n_events: int
    n_judgments: int
    favorable: int
    win_rate: float
    invalid_judgments: int
    by_outcome: dict

    def to_json(self) -> dict:
        return {
            "model": self.model_id,
            "opponent": self.opponent_id,
            "n_events": self.n_events,
            "n_judgments": self.n_judgments,
            "favorable": self.favorable,
            "win_rate": self.win_rate,
            "invalid_judgments": self.invalid_judgments,
            "by_outcome": dict(self.by_outcome),
        }


def build_judge_prompt(a_pred: str, b_pred: str, gt: str) -> str:
    """Instantiate the judge template byte-for-byte.

    Inputs are substituted verbatim, with no escaping: text containing the
    section delimiters will confuse delimiter-based consumers such as the
    lexical judge (a documented hazard of the format).
    """
    if not gt:
        raise EmptyGroundTruth("the judge prompt needs a non-empty reference commentary")
    return JUDGE_PROMPT_TEMPLATE.format(a_pred=a_pred, b_pred=b_pred, gt_asr=gt)


def parse_verdict(raw: str) -> Verdict:
    """Map a raw judge response onto a verdict.

    The response must contain exactly one of the two canonical sentences;
    anything else (neither, or both) is Invalid.
    """
    has_a = A_WINS_SENTENCE in raw
    has_b = B_WINS_SENTENCE in raw
    if has_a and not has_b:
        return Verdict(VerdictKind.A_WINS, raw)
    if has_b and not has_a:
        return Verdict(VerdictKind.B_WINS, raw)
    return Verdict(VerdictKind.INVALID, raw)


def _judged(judge: Judge, prompt: str, retries: int) -> Verdict:
    last_exc: Exception | None = None
    verdict: Verdict | None = None
    for _ in range(retries + 1):
        try:
            raw = judge.compare(prompt)
        except Exception as exc:
            last_exc = exc
            continue
        verdict = parse_verdict(raw)
        if verdict.kind is not VerdictKind.INVALID:
            return verdict
    if verdict is not None:
        return verdict
    raise JudgeFailure(f"judge failed on all {retries + 1} attempts") from last_exc


def run_match(
    tested_pred: str,
    baseline_pred: str,
    gt: str,
    judge: Judge,
    event_id: str = "",
    retries: int = 2,
) -> MatchResult:
    """Judge one event twice, with the tested model in each position.

    Favorable judgments are those electing the tested commentary; invalid
    verdicts count for neither side. The outcome compares favorable against
    unfavorable judgments so that relabeling the two models always maps
    Win to Loss and leaves Split fixed, even when a judgment is invalid.
    """
    forward = _judged(judge, build_judge_prompt(tested_pred, baseline_pred, gt), retries)
    swapped = _judged(judge, build_judge_prompt(baseline_pred, tested_pred, gt), retries)
    favorable = 0
    unfavorable = 0
    for verdict, favored_kind in ((forward, VerdictKind.A_WINS), (swapped, VerdictKind.B_WINS)):
        if verdict.kind is VerdictKind.INVALID:
            continue
        if verdict.kind is favored_kind:
            favorable += 1
        else:
            unfavorable += 1
    if favorable > unfavorable:
        outcome = MatchOutcome.WIN
    elif favorable < unfavorable:
        outcome = MatchOutcome.LOSS
    else:
        outcome = MatchOutcome.SPLIT
    return MatchResult(
        event_id=event_id,
        verdict_forward=forward,
        verdict_swapped=swapped,
        outcome=outcome,
        favorable_judgments=favorable,
    )


def win_rate(
    results: list[MatchResult], model_id: str = "tested", opponent_id: str = "baseline"
) -> WinRateReport:
    """Aggregate favorable judgments over valid judgments."""
    if not results:
        raise NoValidJudgments("no match results to aggregate")
    favorable = sum(r.favorable_judgments for r in results)
    invalid = sum(r.invalid_judgments for r in results)
    valid = 2 * len(results) - invalid
    if valid == 0:
        raise NoValidJudgments("every judgment was invalid")
    outcomes = Counter(r.outcome.value for r in results)
    return WinRateReport(
        model_id=model_id,
        opponent_id=opponent_id,
        n_events=len(results),
        n_judgments=valid,
        favorable=favorable,
        win_rate=favorable / valid,
        invalid_judgments=invalid,
        by_outcome={k: outcomes.get(k, 0) for k in ("win", "loss", "split")},
    )


# ---------------------------------------------------------------------------
# Judges
# ---------------------------------------------------------------------------


def token_f1(pred: str, ref: str) -> float:
    """Multiset token-overlap F1 between two texts (casefolded)."""
    p = Counter(pred.casefold().split())
    r = Counter(ref.casefold().split())
    common = sum((p & r).values())
    if common == 0:
        return 0.0
    precision = common / sum(p.values())
    recall = common / sum(r.values())
    return 2 * precision * recall / (precision + recall)


class LexicalJudge:
    """Deterministic judge: higher token-overlap F1 against the reference wins.

    Exact ties go to Commentary A, deliberately position-biased so the
    swapped second judgment turns a tie into a Split.
    """

    def compare(self, prompt_text: str) -> str:
        a_pred = _extract_section(prompt_text, "---Commentary A---\n")
        b_pred = _extract_section(prompt_text, "---Commentary B---\n")
        gt = _extract_section(prompt_text, "---Human Commentary---\n")
        if token_f1(a_pred, gt) >= token_f1(b_pred, gt):
            return A_WINS_SENTENCE + "."
        return B_WINS_SENTENCE + "."


def _extract_section(prompt: str, header: str) -> str:
    start = prompt.index(header) + len(header)
    end = prompt.index("\n----------", start)
    return prompt[start:end]


def lexical_judge() -> LexicalJudge:
    return LexicalJudge()


class ReplayJudge:
    """Serves recorded judge responses, keyed by prompt digest.

    The record file is JSON Lines of ``{"key": sha256-hex-of-prompt,
    "text": response}``; a missing prompt raises, surfacing as JudgeFailure.
    """

    def __init__(self, responses: Mapping[str, str]):
        self._responses = dict(responses)

    @classmethod
    def from_file(cls, path) -> "ReplayJudge":
        responses = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    record = json.loads(line)
                    responses[record["key"]] = record["text"]
        return cls(responses)

    @staticmethod
    def key_for(prompt: str) -> str:
        return hashlib.sha256(prompt.encode("utf-8")).hexdigest()

    def compare(self, prompt_text: str) -> str:
        key = self.key_for(prompt_text)
        if key not in self._responses:
            raise KeyError(f"no recorded response for prompt {key[:12]}...")
        return self._responses[key]


class EndpointJudge:
    """Talks to a chat-completion style endpoint.

    Request ``{"model", "prompt", "temperature": 0}``, response ``{"text"}``.
    A custom ``transport`` (payload dict -> response dict) can replace the
    default HTTP POST, e.g. for tests.
    """

    def __init__(
        self,
        url: str,
        model: str,
        temperature: float = 0.0,
        timeout_s: float = 60.0,
        transport: Callable[[dict], dict] | None = None,
    ):
        self.url = url
        self.model = model
        self.temperature = temperature
        self.timeout_s = timeout_s
        self._transport = transport or self._http_post

    def _http_post(self, payload: dict) -> dict:
        request = urllib.request.Request(
            self.url,
            data=json.dumps(payload).encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
        with urllib.request.urlopen(request, timeout=self.timeout_s) as response:
            return json.loads(response.read().decode("utf-8"))

    def compare(self, prompt_text: str) -> str:
        payload = {"model": self.model, "prompt": prompt_text, "temperature": self.temperature}
        return str(self._transport(payload)["text"])


# ---------------------------------------------------------------------------
# MCQ track
# ---------------------------------------------------------------------------


class QuestionType(str, Enum):
    WHO = "who"
    WHEN = "when"
    WHAT = "what"


@dataclass(frozen=True)
class Mcq:
    question_id: str
    question: str
    options: tuple[str, str, str, str]
    answer_index: int
    qtype: QuestionType
    needs_ocr: bool = False

    def __post_init__(self):
        if len(self.options) != 4:
            raise ValueError(f"MCQs carry exactly 4 options, got {len(self.options)}")
        if not 0 <= self.answer_index <= 3:
            raise ValueError(f"answer_index must be 0..3, got {self.answer_index}")


@dataclass
class McqReport:
    n_questions: int
    n_unanswered: int
    overall: float
    by_qtype: dict = field(default_factory=dict)
    ocr: float | None = None
    non_ocr: float | None = None

    def to_json(self) -> dict:
        return {
            "n_questions": self.n_questions,
            "n_unanswered": self.n_unanswered,
            "overall": self.overall,
            "by_qtype": dict(self.by_qtype),
            "ocr": self.ocr,
            "non_ocr": self.non_ocr,
        }


def mcq_accuracy(answers: Mapping[str, int], mcqs: list[Mcq]) -> McqReport:
    """Overall, per-type, and OCR-slice accuracy of submitted choices.

    Unanswered questions count as wrong and are tallied separately.
    """
    if not mcqs:
        raise ValueError("cannot compute accuracy over an empty MCQ list")
    correct_total = 0
    unanswered = 0
    per_type: dict[str, list[int]] = {q.value: [0, 0] for q in QuestionType}
    ocr_counts = [0, 0]
    non_ocr_counts = [0, 0]
    for mcq in mcqs:
        choice = answers.get(mcq.question_id)
        if choice is None:
            unanswered += 1
        correct = choice == mcq.answer_index
        correct_total += correct
        bucket = per_type[mcq.qtype.value]
        bucket[0] += correct
        bucket[1] += 1
        slice_counts = ocr_counts if mcq.needs_ocr else non_ocr_counts
        slice_counts[0] += correct
        slice_counts[1] += 1
    by_qtype = {
        qtype: (hits / total if total else None) for qtype, (hits, total) in per_type.items()
    }
    return McqReport(
        n_questions=len(mcqs),
        n_unanswered=unanswered,
        overall=correct_total / len(mcqs),
        by_qtype=by_qtype,
        ocr=ocr_counts[0] / ocr_counts[1] if ocr_counts[1] else None,
        non_ocr=non_ocr_counts[0] / non_ocr_counts[1] if non_ocr_counts[1] else None,
    )
