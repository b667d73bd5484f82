"""Pipeline configuration: mode presets, config files, flag overrides.

Config files are flat ``key = value`` lines mirroring the policy field
names (``#`` starts a comment). Values may be quoted to preserve leading or
trailing spaces, e.g. ``eos_token = " ..."``. Flags override file values,
which override the mode preset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .clips import ClipPolicy
from .errors import ConfigError
from .gates import GateConfig
from .interleave import ContextMode, InterleavePolicy


class Mode(str, Enum):
    PRETRAIN = "pretrain"
    SFT = "sft"


@dataclass
class PipelineConfig:
    mode: Mode = Mode.PRETRAIN
    clip_policy: ClipPolicy = field(default_factory=ClipPolicy)
    gate_config: GateConfig = field(default_factory=GateConfig)
    interleave_policy: InterleavePolicy = field(default_factory=InterleavePolicy)
    shard_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.shard_count < 1:
            raise ConfigError(f"shard_count must be >= 1, got {self.shard_count}")

    @classmethod
    def for_mode(cls, mode: Mode) -> "PipelineConfig":
        """Mode presets: the pretrain path keeps mid-sentence clips and a
        wider loss band; the SFT path requires sentence starts, tightens the
        loss band, and carries no title/previous-text context."""
        if mode is Mode.PRETRAIN:
            return cls(
                mode=mode,
                clip_policy=ClipPolicy(max_len_s=240.0, sentence_start_mode=False),
                gate_config=GateConfig(nll_lo=1.5, nll_hi=6.5),
                interleave_policy=InterleavePolicy(context_mode=ContextMode.TITLE_OR_PREV),
            )
        return cls(
            mode=mode,
            clip_policy=ClipPolicy(max_len_s=240.0, sentence_start_mode=True),
            gate_config=GateConfig(nll_lo=1.5, nll_hi=5.0),
            interleave_policy=InterleavePolicy(context_mode=ContextMode.NONE),
        )


def parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        values[key.strip()] = value.strip()
    return values


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _unquote(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _parse_denylist(text: str) -> frozenset[str]:
    return frozenset(part.strip() for part in _unquote(text).split(",") if part.strip())


# key -> (attribute path, caster)
_CONFIG_KEYS = {
    "mode": ("mode", Mode),
    "shard_count": ("shard_count", int),
    "seed": ("seed", int),
    "gap_split_s": ("clip_policy.gap_split_s", float),
    "min_len_s": ("clip_policy.min_len_s", float),
    "max_len_s": ("clip_policy.max_len_s", float),
    "rate_min": ("clip_policy.rate_min", float),
    "rate_max": ("clip_policy.rate_max", float),
    "sentence_start_mode": ("clip_policy.sentence_start_mode", _parse_bool),
    "min_distinct_words": ("gate_config.min_distinct_words", int),
    "lang_confidence_min": ("gate_config.lang_confidence_min", float),
    "required_lang": ("gate_config.required_lang", _unquote),
    "nll_lo": ("gate_config.nll_lo", float),
    "nll_hi": ("gate_config.nll_hi", float),
    "talking_head_max": ("gate_config.talking_head_max", float),
    "category_denylist": ("gate_config.category_denylist", _parse_denylist),
    "fps": ("interleave_policy.fps", float),
    "first_interval_s": ("interleave_policy.first_interval_s", float),
    "interval_s": ("interleave_policy.interval_s", float),
    "eos_token": ("interleave_policy.eos_token", _unquote),
    "context_mode": ("interleave_policy.context_mode", ContextMode),
    "prev_asr_char_cap": ("interleave_policy.prev_asr_char_cap", int),
}


def apply_values(config: PipelineConfig, values: dict[str, str]) -> PipelineConfig:
    """Apply raw key/value overrides onto a config, revalidating policies."""
    for key, raw in values.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key: {key!r}")
        path, caster = _CONFIG_KEYS[key]
        try:
            value = caster(raw)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
        target = config
        *parents, attr = path.split(".")
        for parent in parents:
            target = getattr(target, parent)
        setattr(target, attr, value)
    # re-run invariant checks after mutation
    for policy in (config.clip_policy, config.gate_config, config.interleave_policy):
        policy.__post_init__()
    config.__post_init__()
    return config


def load_config(
    mode: Mode | None = None,
    config_path=None,
    overrides: dict[str, str] | None = None,
) -> PipelineConfig:
    """Compose the effective config: mode preset <- file <- flag overrides.

    An explicit ``mode`` argument (e.g. from a CLI flag) beats the file's
    ``mode`` key, which beats the pretrain default.
    """
    file_values = parse_config_file(config_path) if config_path else {}
    if mode is None:
        try:
            mode = Mode(file_values.get("mode", Mode.PRETRAIN.value))
        except ValueError as exc:
            raise ConfigError(f"unknown mode: {file_values['mode']!r}") from exc
    config = PipelineConfig.for_mode(mode)
    apply_values(config, {k: v for k, v in file_values.items() if k != "mode"})
    apply_values(config, {k: v for k, v in (overrides or {}).items() if k != "mode"})
    return config
