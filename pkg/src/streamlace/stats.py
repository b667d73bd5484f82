"""Dataset statistics over clip records."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

DURATION_EDGES = [0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0, 210.0, 240.0]
RATE_EDGES = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0]


@dataclass
class StatsReport:
    n_clips: int = 0
    total_hours: float = 0.0
    total_words: int = 0
    duration_hist: dict = field(default_factory=dict)
    rate_hist: dict = field(default_factory=dict)
    category_counts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "n_clips": self.n_clips,
            "total_hours": self.total_hours,
            "total_words": self.total_words,
            "duration_hist": dict(self.duration_hist),
            "rate_hist": dict(self.rate_hist),
            "category_counts": dict(sorted(self.category_counts.items())),
        }


def _bin_label(edges: list[float], value: float) -> str:
    """Label of the half-open bin holding value; the last bin is unbounded."""
    for lo, hi in zip(edges, edges[1:]):
        if lo <= value < hi:
            return f"[{lo:g},{hi:g})"
    return f"[{edges[-1]:g},inf)"


def _empty_hist(edges: list[float]) -> dict:
    hist = {f"[{lo:g},{hi:g})": 0 for lo, hi in zip(edges, edges[1:])}
    hist[f"[{edges[-1]:g},inf)"] = 0
    return hist


def compute_stats(clip_records: Iterable[dict]) -> StatsReport:
    """Histogram clip durations and speech rates; every record lands in
    exactly one bin, so histogram mass equals the record count."""
    report = StatsReport(
        duration_hist=_empty_hist(DURATION_EDGES), rate_hist=_empty_hist(RATE_EDGES)
    )
    total_seconds = 0.0
    for record in clip_records:
        duration = (record["end_ms"] - record["start_ms"]) / 1000.0
        n_words = record.get("n_words", len(record.get("words", [])))
        rate = n_words / duration if duration > 0 else math.inf
        report.n_clips += 1
        report.total_words += n_words
        total_seconds += duration
        report.duration_hist[_bin_label(DURATION_EDGES, duration)] += 1
        report.rate_hist[_bin_label(RATE_EDGES, rate)] += 1
        category = record.get("category", "unknown")
        report.category_counts[category] = report.category_counts.get(category, 0) + 1
    report.total_hours = total_seconds / 3600.0
    return report
