"""Imbalance statistics over method-score tables and base rates.

Implements the correlation / variance / standard-deviation analysis that
relates per-AU detection scores to AU base rates, plus the closed-form
metrics of the constant all-active ("ones") predictor. Reference score
tables, base rates, and histogram vectors are shipped as CSV fixtures under
``aupatterns/fixtures`` with pinned SHA-256 checksums.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .metrics import AuMetricRow, MetricReport, Score
from .mining import BaseRates

__all__ = [
    "MethodScoreTable",
    "CorrelationReport",
    "pearson",
    "variance",
    "std",
    "imbalance_correlations",
    "cross_method_std",
    "ones_baseline",
    "fixture_path",
    "load_method_scores",
    "load_rates",
    "load_histogram_fixture",
    "load_ones_reference",
    "verify_fixtures",
    "FixtureError",
]


class FixtureError(RuntimeError):
    """A bundled fixture file is missing or fails checksum verification."""


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation sum((x-xm)(y-ym)) / sqrt(sum((x-xm)^2) sum((y-ym)^2)).

    Returns NaN (undefined) when either argument is constant.
    """
    if len(x) != len(y):
        raise ValueError("sequences must have equal length")
    n = len(x)
    if n < 2:
        raise ValueError("need at least 2 points")
    xm = sum(x) / n
    ym = sum(y) / n
    sxy = sum((a - xm) * (b - ym) for a, b in zip(x, y))
    sxx = sum((a - xm) ** 2 for a in x)
    syy = sum((b - ym) ** 2 for b in y)
    if sxx == 0.0 or syy == 0.0:
        return float("nan")
    return sxy / math.sqrt(sxx * syy)


def variance(x: Sequence[float]) -> float:
    """Sample variance with the n-1 denominator."""
    n = len(x)
    if n < 2:
        raise ValueError("variance needs at least 2 values")
    m = sum(x) / n
    return sum((a - m) ** 2 for a in x) / (n - 1)


def std(x: Sequence[float]) -> float:
    return math.sqrt(variance(x))


@dataclass(frozen=True)
class MethodScoreTable:
    """Per-AU F1 scores for a set of methods; None marks a missing cell."""

    au_codes: tuple[int, ...]
    columns: dict[str, tuple[float | None, ...]]

    def __post_init__(self):
        for name, col in self.columns.items():
            if len(col) != len(self.au_codes):
                raise ValueError(f"column {name!r} length != number of AU rows")
            if any(v is not None and not 0.0 <= v <= 1.0 for v in col):
                raise ValueError(f"column {name!r} has values outside [0, 1]")

    @property
    def methods(self) -> tuple[str, ...]:
        return tuple(self.columns)


@dataclass(frozen=True)
class CorrelationReport:
    """Per-method correlation against base rates; NaN marks a skipped method."""

    correlations: dict[str, float]
    skipped: tuple[str, ...]

    @property
    def average(self) -> float:
        vals = [v for v in self.correlations.values() if not math.isnan(v)]
        if not vals:
            return float("nan")
        return sum(vals) / len(vals)


def imbalance_correlations(
    scores: MethodScoreTable, rates: BaseRates, exclude: Sequence[str] = ()
) -> CorrelationReport:
    """One Pearson value per method between its per-AU scores and base rates.

    Missing cells are excluded pairwise; methods with fewer than two
    non-missing cells are skipped and reported as NaN.
    """
    if scores.au_codes != tuple(rates.codes):
        raise ValueError("AU rows of the score table must align with the rates")
    out: dict[str, float] = {}
    skipped: list[str] = []
    for name, col in scores.columns.items():
        if name in exclude:
            continue
        pairs = [(r, v) for r, v in zip(rates.rates, col) if v is not None]
        if len(pairs) < 2:
            out[name] = float("nan")
            skipped.append(name)
            continue
        xs, ys = zip(*pairs)
        out[name] = pearson(xs, ys)
    return CorrelationReport(out, tuple(skipped))


def cross_method_std(
    scores: MethodScoreTable, exclude: Sequence[str] = ()
) -> tuple[dict[int, float], float]:
    """Sample std of each AU's scores across method columns, plus the average.

    AUs with fewer than two non-missing cells get NaN and are left out of the
    average. ``exclude`` drops columns (e.g. a control baseline) beforehand.
    """
    names = [m for m in scores.methods if m not in exclude]
    per_au: dict[int, float] = {}
    for i, au in enumerate(scores.au_codes):
        vals = [scores.columns[m][i] for m in names]
        vals = [v for v in vals if v is not None]
        per_au[au] = std(vals) if len(vals) >= 2 else float("nan")
    ok = [v for v in per_au.values() if not math.isnan(v)]
    avg = sum(ok) / len(ok) if ok else float("nan")
    return per_au, avg


def ones_baseline(rates: BaseRates) -> MetricReport:
    """Closed-form metrics of the predictor that marks every AU active.

    With base rate p: f1_binary = 2p/(1+p), f1_micro = p, f1_macro = p/(1+p),
    auc = 0.5. Flags mirror what direct evaluation would hit: no positives
    (p=0) leaves the positive class unsupported, no negatives (p=1) leaves
    the negative class degenerate, and AUC needs both.
    """
    rows = []
    for code, p in zip(rates.codes, rates.rates):
        rows.append(
            AuMetricRow(
                au=code,
                f1_binary=Score(2 * p / (1 + p), degenerate=(p == 0.0)),
                f1_micro=Score(p),
                f1_macro=Score(p / (1 + p), degenerate=(p == 1.0)),
                auc=Score(0.5, degenerate=(p in (0.0, 1.0))),
                confusion=None,
            )
        )
    return MetricReport(tuple(rows), provenance="ones-baseline")


# ---------------------------------------------------------------------------
# fixtures

def fixture_path(name: str) -> Path:
    p = Path(str(resources.files("aupatterns").joinpath("fixtures", name)))
    if not p.exists():
        raise FixtureError(f"fixture {name} not found at {p}")
    return p


def verify_fixtures(directory: Path | None = None) -> dict[str, str]:
    """Check every bundled fixture against its pinned SHA-256.

    Returns {filename: digest} on success, raises FixtureError on mismatch.
    """
    base = Path(directory) if directory is not None else fixture_path("checksums.json").parent
    expected = json.loads((base / "checksums.json").read_text())
    digests = {}
    for name, want in expected.items():
        f = base / name
        if not f.exists():
            raise FixtureError(f"fixture {name} missing from {base}")
        got = hashlib.sha256(f.read_bytes()).hexdigest()
        if got != want:
            raise FixtureError(f"fixture {name} checksum mismatch: {got} != {want}")
        digests[name] = got
    return digests


def _read_csv(path: Path) -> list[list[str]]:
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row]


def load_method_scores(path: Path) -> MethodScoreTable:
    """Score-table CSV: header ``au,<method>,...``; blank cells are missing."""
    rows = _read_csv(path)
    header = rows[0]
    if header[0] != "au":
        raise FixtureError(f"{path}: first column must be 'au'")
    methods = header[1:]
    codes = []
    cols: dict[str, list[float | None]] = {m: [] for m in methods}
    for row in rows[1:]:
        codes.append(int(row[0]))
        for m, cell in zip(methods, row[1:]):
            cols[m].append(float(cell) if cell != "" else None)
    return MethodScoreTable(tuple(codes), {m: tuple(v) for m, v in cols.items()})


def load_rates(path: Path) -> BaseRates:
    """Base-rate CSV: header ``au,rate``."""
    rows = _read_csv(path)
    if rows[0] != ["au", "rate"]:
        raise FixtureError(f"{path}: expected header au,rate")
    codes = tuple(int(r[0]) for r in rows[1:])
    rates = tuple(float(r[1]) for r in rows[1:])
    return BaseRates(codes, rates)


def load_histogram_fixture(path: Path) -> list[dict]:
    """Histogram CSV: header ``bin_lo,bin_hi,count,percent``."""
    rows = _read_csv(path)
    if rows[0] != ["bin_lo", "bin_hi", "count", "percent"]:
        raise FixtureError(f"{path}: expected header bin_lo,bin_hi,count,percent")
    return [
        {
            "bin_lo": int(r[0]),
            "bin_hi": int(r[1]),
            "count": int(r[2]),
            "percent": float(r[3]),
        }
        for r in rows[1:]
    ]


def load_ones_reference(path: Path) -> dict[int, dict[str, float]]:
    """Reference metrics of the all-active control, one row per AU."""
    rows = _read_csv(path)
    if rows[0] != ["au", "f1_binary", "f1_micro", "f1_macro", "auc"]:
        raise FixtureError(f"{path}: unexpected header {rows[0]}")
    out = {}
    for r in rows[1:]:
        out[int(r[0])] = {
            "f1_binary": float(r[1]),
            "f1_micro": float(r[2]),
            "f1_macro": float(r[3]),
            "auc": float(r[4]),
        }
    return out
