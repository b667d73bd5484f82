"""Text, language, and visual retention gates, plus informativeness ranking.

Heavy models (perplexity scorer, language detector, talking-head detector)
sit behind small interfaces. Reference implementations built on character
trigrams and unigram frequencies ship here so the whole pipeline runs
hermetically; production deployments plug real models in via the
external-process protocol (newline-delimited JSON over stdin/stdout).
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Protocol

from .clips import Clip
from .decisions import DropReason, GateDecision, KEEP
from .errors import ConfigError, DetectorFailure, ScorerFailure
from .ndjson_proc import NdjsonProcess, ProcessProtocolError
from .transcript import VideoMeta

DEFAULT_CATEGORY_DENYLIST = frozenset({"People & Blogs", "Film & Animation"})


@dataclass
class GateConfig:
    min_distinct_words: int = 30
    lang_confidence_min: float = 0.9
    required_lang: str = "en"
    nll_lo: float = 1.5
    nll_hi: float = 6.5
    talking_head_max: float = 0.3
    category_denylist: frozenset[str] = DEFAULT_CATEGORY_DENYLIST

    def __post_init__(self):
        if not 0 < self.lang_confidence_min <= 1:
            raise ConfigError(f"lang_confidence_min must be in (0,1], got {self.lang_confidence_min}")
        if not self.nll_lo < self.nll_hi:
            raise ConfigError(f"need nll_lo < nll_hi, got {self.nll_lo}/{self.nll_hi}")
        if not 0 <= self.talking_head_max <= 1:
            raise ConfigError(f"talking_head_max must be in [0,1], got {self.talking_head_max}")


class TextScorer(Protocol):
    def score(self, text: str) -> float:
        """Mean per-token negative log-likelihood, in nats/token."""


class LangDetector(Protocol):
    def detect(self, text: str) -> tuple[str, float]:
        """Return (language_tag, confidence in [0,1])."""


class TalkingHeadDetector(Protocol):
    def score(self, frame_sample: str) -> float:
        """Confidence in [0,1] that the video is persistent talking-head."""


def normalize_token(token: str) -> str:
    """Casefold and strip leading/trailing punctuation (Unicode P*)."""
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end].casefold()


def distinct_word_count(text: str) -> int:
    return len({t for t in (normalize_token(tok) for tok in text.split()) if t})


def gate_language(text: str, detector: LangDetector, cfg: GateConfig) -> GateDecision:
    """Keep iff the detector agrees with the required language at high
    confidence and the text is not sparse."""
    try:
        tag, confidence = detector.detect(text)
    except Exception:
        return GateDecision(False, DropReason.DETECTOR_ERROR)
    if tag != cfg.required_lang:
        return GateDecision(False, DropReason.WRONG_LANGUAGE, confidence)
    if confidence < cfg.lang_confidence_min:
        return GateDecision(False, DropReason.LOW_CONFIDENCE, confidence)
    n_distinct = distinct_word_count(text)
    if n_distinct < cfg.min_distinct_words:
        return GateDecision(False, DropReason.SPARSE_CC, float(n_distinct))
    return GateDecision(True, measured_value=confidence)


def gate_perplexity(clip_text: str, scorer: TextScorer, lo: float, hi: float) -> GateDecision:
    """Keep iff the mean NLL lands inside [lo, hi], endpoints included."""
    try:
        value = scorer.score(clip_text)
    except Exception:
        return GateDecision(False, DropReason.SCORER_ERROR)
    if value < lo:
        return GateDecision(False, DropReason.TOO_PREDICTABLE, value)
    if value > hi:
        return GateDecision(False, DropReason.TOO_UNPREDICTABLE, value)
    return GateDecision(True, measured_value=value)


def gate_talking_head(confidence: float, cfg: GateConfig) -> GateDecision:
    """Keep iff the detector confidence is strictly below the threshold."""
    if confidence < cfg.talking_head_max:
        return GateDecision(True, measured_value=confidence)
    return GateDecision(False, DropReason.TALKING_HEAD, confidence)


def gate_category(meta: VideoMeta, cfg: GateConfig) -> GateDecision:
    if meta.category in cfg.category_denylist:
        return GateDecision(False, DropReason.BLOCKED_CATEGORY)
    return KEEP


def rank_informativeness(clips: list[Clip]) -> list[Clip]:
    """Order clips by distinct word count, most informative first.

    Ties break on (video_id, start_ms) ascending so the ordering is total
    and stable across runs.
    """
    return sorted(
        clips,
        key=lambda c: (-distinct_word_count(c.text()), c.video_id, int(round(c.start_s * 1000))),
    )


def select_top(ranked: list[Clip], n: int) -> list[Clip]:
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    return ranked[:n]


# ---------------------------------------------------------------------------
# Hermetic reference implementations
# ---------------------------------------------------------------------------

_EN_SEED = """
the game is on and the home side pushes forward again with a quick pass down
the right wing before the defender steps in to clear the ball away from danger
now they build from the back and the keeper rolls it out to start another move
this recipe starts with two cups of flour and a pinch of salt then you fold in
the butter slowly until the mixture looks like coarse sand and comes together
rain moves in from the west tonight while temperatures fall near the coast and
winds pick up over the hills so expect a slow drive on the main roads tomorrow
he takes the shot from outside the box and it goes just wide of the far post
she climbs back into the lead after a strong final lap and the crowd is loud
first remove the four screws on the back panel and set them aside in a small
bowl so you do not lose them then gently lift the cover away from the case
"""

_ES_SEED = """
el partido sigue y el equipo local empuja hacia adelante con un pase rapido
por la banda derecha antes de que el defensa despeje el balon lejos del area
esta receta comienza con dos tazas de harina y una pizca de sal luego se anade
la mantequilla poco a poco hasta que la mezcla quede como arena gruesa
la lluvia llega esta noche desde el oeste mientras bajan las temperaturas
"""

_FR_SEED = """
le match continue et l'equipe locale pousse vers l'avant avec une passe rapide
sur l'aile droite avant que le defenseur ne degage le ballon loin de la zone
cette recette commence avec deux tasses de farine et une pincee de sel puis on
ajoute le beurre petit a petit jusqu'a ce que le melange ressemble a du sable
la pluie arrive ce soir par l'ouest tandis que les temperatures baissent
"""

_DE_SEED = """
das spiel lauft weiter und die heimmannschaft drangt mit einem schnellen pass
auf dem rechten flugel nach vorne bevor der verteidiger den ball klaren kann
dieses rezept beginnt mit zwei tassen mehl und einer prise salz dann wird die
butter langsam untergehoben bis die mischung wie grober sand aussieht
der regen zieht heute nacht von westen heran wahrend die temperaturen fallen
"""


class UnigramNllScorer:
    """Mean per-token negative log-likelihood from a unigram frequency table.

    Add-one smoothing over the table vocabulary plus one unseen slot. Fit on
    a corpus of your own with ``fit``; the default table comes from a small
    built-in English seed so the pipeline runs without any model download.
    """

    def __init__(self, counts: Mapping[str, int] | None = None):
        if counts is None:
            counts = Counter(normalize_token(t) for t in _EN_SEED.split())
            counts.pop("", None)
        self._counts = dict(counts)
        self._total = sum(self._counts.values())
        self._vocab = len(self._counts)

    @classmethod
    def fit(cls, texts: list[str]) -> "UnigramNllScorer":
        counts: Counter = Counter()
        for text in texts:
            counts.update(t for t in (normalize_token(tok) for tok in text.split()) if t)
        return cls(counts)

    def score(self, text: str) -> float:
        tokens = [t for t in (normalize_token(tok) for tok in text.split()) if t]
        if not tokens:
            raise ScorerFailure("cannot score empty text")
        denom = self._total + self._vocab + 1
        nll = 0.0
        for tok in tokens:
            nll -= math.log((self._counts.get(tok, 0) + 1) / denom)
        return nll / len(tokens)


class TrigramLanguageDetector:
    """Character-trigram Bayes classifier over a small set of languages.

    Confidence is the posterior of the best language under a uniform prior,
    so long unambiguous text saturates toward 1.0.
    """

    def __init__(self, seeds: Mapping[str, str] | None = None):
        seeds = seeds or {"en": _EN_SEED, "es": _ES_SEED, "fr": _FR_SEED, "de": _DE_SEED}
        self._models: dict[str, tuple[Counter, int]] = {}
        universe: set[str] = set()
        for tag, seed in seeds.items():
            grams = Counter(self._trigrams(seed))
            self._models[tag] = (grams, sum(grams.values()))
            universe.update(grams)
        self._universe = len(universe) + 1

    @staticmethod
    def _trigrams(text: str):
        flat = " ".join(text.casefold().split())
        return (flat[i : i + 3] for i in range(len(flat) - 2))

    def detect(self, text: str) -> tuple[str, float]:
        grams = Counter(self._trigrams(text))
        if not grams:
            raise DetectorFailure("cannot detect language of empty text")
        scores = {}
        for tag, (model, total) in self._models.items():
            denom = total + self._universe
            ll = 0.0
            for gram, n in grams.items():
                ll += n * math.log((model.get(gram, 0) + 1) / denom)
            scores[tag] = ll
        best = max(sorted(scores), key=lambda t: scores[t])
        peak = scores[best]
        posterior = 1.0 / sum(math.exp(ll - peak) for ll in scores.values())
        return best, posterior


@dataclass
class FixedTalkingHeadDetector:
    """Returns canned talking-head confidences, keyed by descriptor."""

    scores: Mapping[str, float] = field(default_factory=dict)
    default: float = 0.0

    def score(self, frame_sample: str) -> float:
        return self.scores.get(frame_sample, self.default)


# ---------------------------------------------------------------------------
# External-process protocol
# ---------------------------------------------------------------------------


class ExternalProcessScorer:
    """Scores text through a child process speaking the NDJSON protocol.

    Requests are ``{"id": int, "text": str}`` on the child's stdin, one per
    line; responses must echo the id: ``{"id": int, "value": float}``.
    Calls are single-flighted; declare ``concurrent_safe`` on other
    implementations to let callers parallelize.
    """

    concurrent_safe = False

    def __init__(self, argv: list[str], timeout_s: float = 30.0):
        self._proc = NdjsonProcess(argv, timeout_s)

    def score(self, text: str) -> float:
        try:
            payload = self._proc.request({"text": text})
            return float(payload["value"])
        except ProcessProtocolError as exc:
            raise ScorerFailure(str(exc)) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ScorerFailure(f"external scorer response missing value: {exc}") from exc

    def close(self):
        self._proc.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class ExternalProcessLangDetector:
    """Language detection over the same NDJSON transport.

    The response ``value`` is the confidence; an optional ``tag`` field
    names the detected language, defaulting to ``assumed_tag`` (the
    protocol's minimal form carries only a float).
    """

    concurrent_safe = False

    def __init__(self, argv: list[str], assumed_tag: str = "en", timeout_s: float = 30.0):
        self._proc = NdjsonProcess(argv, timeout_s)
        self._assumed_tag = assumed_tag

    def detect(self, text: str) -> tuple[str, float]:
        try:
            payload = self._proc.request({"text": text})
            confidence = float(payload["value"])
        except Exception as exc:
            raise DetectorFailure(str(exc)) from exc
        return str(payload.get("tag", self._assumed_tag)), confidence

    def close(self):
        self._proc.close()
