"""Occurrence statistics: base rates, pattern censuses, histograms, per-task
tops, and threshold-selected pattern codebooks.

All counting is exact integer arithmetic and invariant to frame order. Ties
between equally frequent patterns are always broken bitwise-lexicographically
so reports are deterministic.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from functools import cached_property

from .annotations import AuPattern, DatasetTable

__all__ = [
    "BaseRates",
    "PatternCensus",
    "PatternCodebook",
    "DEFAULT_HISTOGRAM_EDGES",
    "base_rates",
    "census",
    "top_bottom",
    "histogram",
    "top_pattern_per_task",
    "select_patterns_by_min_count",
    "restrict",
    "census_report_csv",
]

# Frame-count bin edges used for pattern-frequency histograms: [lo, hi) with
# the final bin right-inclusive.
DEFAULT_HISTOGRAM_EDGES = (0, 5, 10, 50, 100, 200, 500, 1000, 2000, 5000, 11000)


@dataclass(frozen=True)
class BaseRates:
    """Per-AU fraction of frames in which the AU is active."""

    codes: tuple[int, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        if len(self.codes) != len(self.rates):
            raise ValueError("one rate per AU code required")
        if any(not 0.0 <= r <= 1.0 for r in self.rates):
            raise ValueError("rates must lie in [0, 1]")

    def rate_of(self, code: int) -> float:
        return self.rates[self.codes.index(code)]


@dataclass(frozen=True)
class PatternCensus:
    """Exact multiset count of the patterns in a table."""

    entries: dict[AuPattern, int]
    total_frames: int

    def __post_init__(self):
        if any(c <= 0 for c in self.entries.values()):
            raise ValueError("census counts must be positive")
        if sum(self.entries.values()) != self.total_frames:
            raise ValueError("census counts must sum to total_frames")

    @property
    def n_distinct(self) -> int:
        return len(self.entries)

    def sorted_entries(self) -> list[tuple[AuPattern, int]]:
        """Entries by descending count, ties bitwise-lexicographic ascending."""
        return sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class PatternCodebook:
    """Dense class indexing of patterns, most frequent first."""

    patterns: tuple[AuPattern, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.patterns) != len(set(self.patterns)):
            raise ValueError("codebook patterns must be unique")
        if len(self.counts) != len(self.patterns):
            raise ValueError("one count per pattern required")
        if any(a < b for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError("codebook counts must be non-increasing")

    def __len__(self) -> int:
        return len(self.patterns)

    def __contains__(self, pattern: AuPattern) -> bool:
        return pattern in self._index

    @cached_property
    def _index(self) -> dict[AuPattern, int]:
        return {p: i for i, p in enumerate(self.patterns)}

    def index_of(self, pattern: AuPattern) -> int:
        try:
            return self._index[pattern]
        except KeyError:
            raise KeyError(f"pattern {pattern.to_string()} not in codebook") from None

    def bits_matrix(self):
        import numpy as np

        return np.array([p.bits for p in self.patterns], dtype=np.float64)

    def describe(self) -> list[str]:
        return [p.to_string() for p in self.patterns]

    def to_json(self) -> str:
        import json

        return json.dumps({"bits": self.describe(), "counts": list(self.counts)})

    @classmethod
    def from_json(cls, text: str) -> "PatternCodebook":
        import json

        d = json.loads(text)
        return cls(
            tuple(AuPattern.from_string(s) for s in d["bits"]),
            tuple(int(c) for c in d["counts"]),
        )


def base_rates(table: DatasetTable) -> BaseRates:
    """rate[j] = (#frames with bit j active) / total frames."""
    if len(table) == 0:
        raise ValueError("cannot compute base rates of an empty table")
    n = len(table)
    counts = [0] * table.registry.k
    for f in table.frames:
        for j, b in enumerate(f.pattern.bits):
            counts[j] += b
    return BaseRates(table.registry.codes, tuple(c / n for c in counts))


def census(table: DatasetTable) -> PatternCensus:
    if len(table) == 0:
        raise ValueError("cannot take a census of an empty table")
    counts = Counter(f.pattern for f in table.frames)
    return PatternCensus(dict(counts), len(table))


def top_bottom(
    cns: PatternCensus, top_n: int, bottom_n: int
) -> tuple[list[tuple[AuPattern, int]], bool]:
    """Highest-count ``top_n`` entries followed by lowest-count ``bottom_n``.

    Returns (entries, truncated). When top_n + bottom_n exceeds the number of
    distinct patterns the bottom selection is truncated (no entry appears
    twice) and the flag is set.
    """
    if cns.n_distinct == 0:
        raise ValueError("census is empty")
    if top_n < 0 or bottom_n < 0:
        raise ValueError("top_n and bottom_n must be non-negative")
    by_top = cns.sorted_entries()
    top = by_top[:top_n]
    remaining = by_top[top_n:]
    by_bottom = sorted(remaining, key=lambda kv: (kv[1], kv[0]))
    bottom = by_bottom[:bottom_n]
    truncated = top_n + bottom_n > cns.n_distinct
    return top + bottom, truncated


def histogram(cns: PatternCensus, bin_edges=DEFAULT_HISTOGRAM_EDGES) -> list[float]:
    """Percentage of distinct patterns whose frame count falls in each bin.

    Bin b covers [edge_b, edge_{b+1}); the final bin is right-inclusive.
    Percentages are over distinct patterns (not frames) and sum to 100.
    """
    edges = list(bin_edges)
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("bin edges must be strictly ascending")
    nbins = len(edges) - 1
    tallies = [0] * nbins
    for count in cns.entries.values():
        if count < edges[0] or count > edges[-1]:
            raise ValueError(
                f"pattern count {count} outside bin range [{edges[0]}, {edges[-1]}]"
            )
        if count == edges[-1]:
            tallies[-1] += 1
            continue
        for b in range(nbins):
            if edges[b] <= count < edges[b + 1]:
                tallies[b] += 1
                break
    total = cns.n_distinct
    return [100.0 * t / total for t in tallies]


def top_pattern_per_task(table: DatasetTable) -> dict[str, tuple[AuPattern, int]]:
    """Per task, the most frequent pattern among that task's frames."""
    if len(table) == 0:
        raise ValueError("cannot analyze an empty table")
    per_task: dict[str, Counter] = {}
    for f in table.frames:
        per_task.setdefault(f.task_id, Counter())[f.pattern] += 1
    out = {}
    for task, counts in per_task.items():
        best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        out[task] = best
    return out


def select_patterns_by_min_count(cns: PatternCensus, min_count: int) -> PatternCodebook:
    """Codebook of every pattern occurring at least ``min_count`` times."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    kept = [(p, c) for p, c in cns.sorted_entries() if c >= min_count]
    if not kept:
        raise ValueError(f"threshold too high: no pattern occurs >= {min_count} times")
    patterns, counts = zip(*kept)
    return PatternCodebook(patterns, counts)


def restrict(
    table: DatasetTable, codebook: PatternCodebook
) -> tuple[DatasetTable, DatasetTable]:
    """Partition frames by codebook membership, preserving order.

    Returns (in_table, out_table); their sizes always sum to len(table).
    Either side may be empty (constructible, but most analyses reject empty
    tables downstream).
    """
    member = {p for p in codebook.patterns}
    mask = [f.pattern in member for f in table.frames]
    in_table = table.subset(mask)
    out_table = table.subset([not m for m in mask])
    return in_table, out_table


def census_report_csv(cns: PatternCensus) -> str:
    """Patterns report: rank,count,percent,bits (percent is of total frames)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "count", "percent", "bits"])
    for rank, (pattern, count) in enumerate(cns.sorted_entries(), start=1):
        pct = 100.0 * count / cns.total_frames
        w.writerow([rank, count, f"{pct:.6f}", pattern.to_string()])
    return buf.getvalue()
