"""Binary detection metrics with pooled-over-folds scoring.

Scores carry an explicit ``degenerate`` flag instead of raising on empty
denominators: F1 variants return 0.0 flagged when their denominator is zero,
and AUC returns 0.5 flagged when either class is absent. Report averages are
arithmetic means over the non-degenerate per-AU values only.

F1-micro is computed by pooling true/false positives one-vs-rest over both
classes, which for a single-label binary task is identical to accuracy
(tp + tn) / total; the identity is exact and tested.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .annotations import AuRegistry, FrameKey

__all__ = [
    "Score",
    "Confusion",
    "AuMetricRow",
    "MetricReport",
    "FoldScores",
    "confusion",
    "f1_binary",
    "f1_micro",
    "f1_macro",
    "auc",
    "pooled_report",
    "report_csv",
]


@dataclass(frozen=True)
class Score:
    value: float
    degenerate: bool = False


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def swapped(self) -> "Confusion":
        """Confusion of the same predictions with class labels swapped."""
        return Confusion(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


def confusion(truth: Sequence[int], pred: Sequence[int]) -> Confusion:
    """Exact confusion counts for equal-length 0/1 sequences."""
    t = np.asarray(truth)
    p = np.asarray(pred)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"length mismatch: truth {t.shape} vs pred {p.shape}")
    if t.size == 0:
        raise ValueError("cannot score empty sequences")
    t = t.astype(bool)
    p = p.astype(bool)
    tp = int(np.sum(t & p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))
    tn = int(np.sum(~t & ~p))
    return Confusion(tp, fp, fn, tn)


def f1_binary(c: Confusion) -> Score:
    """Positive-class F1: 2tp / (2tp + fp + fn)."""
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        return Score(0.0, degenerate=True)
    return Score(2 * c.tp / denom)


def f1_macro(c: Confusion) -> Score:
    """Mean of the positive-class and negative-class F1 scores."""
    pos = f1_binary(c)
    neg = f1_binary(c.swapped())
    return Score((pos.value + neg.value) / 2, degenerate=pos.degenerate or neg.degenerate)


def f1_micro(c: Confusion) -> Score:
    """Two-class one-vs-rest pooled F1; equals accuracy for binary labels."""
    # pooled over both classes: TP = tp + tn, FP = FN = fp + fn
    hits = c.tp + c.tn
    misses = c.fp + c.fn
    return Score(2 * hits / (2 * hits + misses + misses))


def auc(truth: Sequence[int], scores: Sequence[float]) -> Score:
    """Area under the ROC curve via the rank statistic.

    Equal to the fraction of (positive, negative) index pairs where the
    positive outscores the negative, ties counted half; equivalently the
    trapezoidal area under the TPR-vs-FPR graph. Returns 0.5 flagged when
    either class is absent.
    """
    t = np.asarray(truth).astype(bool)
    s = np.asarray(scores, dtype=np.float64)
    if t.shape != s.shape or t.ndim != 1:
        raise ValueError(f"length mismatch: truth {t.shape} vs scores {s.shape}")
    if t.size == 0:
        raise ValueError("cannot score empty sequences")
    if np.isnan(s).any():
        raise ValueError("scores contain NaN")
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return Score(0.5, degenerate=True)
    ranks = _average_ranks(s)
    pos_rank_sum = float(ranks[t].sum())
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2
    return Score(u / (n_pos * n_neg))


def _average_ranks(s: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


@dataclass(frozen=True)
class AuMetricRow:
    au: int
    f1_binary: Score
    f1_micro: Score
    f1_macro: Score
    auc: Score
    confusion: Confusion | None = None


_METRICS = ("f1_binary", "f1_micro", "f1_macro", "auc")


@dataclass(frozen=True)
class MetricReport:
    rows: tuple[AuMetricRow, ...]
    provenance: str = ""

    def row_for(self, au: int) -> AuMetricRow:
        for r in self.rows:
            if r.au == au:
                return r
        raise KeyError(f"no row for AU{au}")

    def average(self, metric: str) -> Score:
        """Arithmetic mean of the non-degenerate per-AU values."""
        if metric not in _METRICS:
            raise KeyError(f"unknown metric {metric!r}")
        scores = [getattr(r, metric) for r in self.rows]
        ok = [s.value for s in scores if not s.degenerate]
        if not ok:
            return Score(float("nan"), degenerate=True)
        return Score(sum(ok) / len(ok))

    def values(self, metric: str) -> list[float]:
        return [getattr(r, metric).value for r in self.rows]


@dataclass(frozen=True)
class FoldScores:
    """One fold's pooled-evaluation payload.

    ``scores`` are per-AU probabilities in [0, 1]; ``pred`` optionally carries
    explicit binary predictions (otherwise scores are thresholded).
    """

    keys: tuple[FrameKey, ...]
    truth: np.ndarray  # (n, k) 0/1
    scores: np.ndarray  # (n, k) float
    pred: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.keys)
        if n == 0:
            raise ValueError("empty fold")
        if self.truth.shape != self.scores.shape or self.truth.shape[0] != n:
            raise ValueError("fold arrays must be (n_frames, k) and match keys")
        if self.pred is not None and self.pred.shape != self.truth.shape:
            raise ValueError("pred must match truth shape")


def pooled_report(
    folds: Sequence[FoldScores],
    registry: AuRegistry,
    threshold: float = 0.5,
    provenance: str = "",
) -> MetricReport:
    """Concatenate all folds' predictions, then score each AU exactly once.

    Folds must cover disjoint frames (checked by key); every pooled metric is
    computed on the concatenated sequences rather than averaged per fold.
    """
    if not folds:
        raise ValueError("no folds given")
    seen: set[FrameKey] = set()
    for f in folds:
        overlap = seen.intersection(f.keys)
        if overlap:
            raise ValueError(f"overlapping fold outputs: {sorted(overlap)[:3]} ...")
        seen.update(f.keys)
    truth = np.concatenate([f.truth for f in folds], axis=0)
    scores = np.concatenate([f.scores for f in folds], axis=0)
    preds = np.concatenate(
        [f.pred if f.pred is not None else (f.scores >= threshold).astype(np.uint8) for f in folds],
        axis=0,
    )
    if truth.shape[1] != registry.k:
        raise ValueError(f"fold width {truth.shape[1]} != registry k {registry.k}")
    rows = []
    for j, code in enumerate(registry.codes):
        c = confusion(truth[:, j], preds[:, j])
        rows.append(
            AuMetricRow(
                au=code,
                f1_binary=f1_binary(c),
                f1_micro=f1_micro(c),
                f1_macro=f1_macro(c),
                auc=auc(truth[:, j], scores[:, j]),
                confusion=c,
            )
        )
    return MetricReport(tuple(rows), provenance=provenance)


def report_csv(report: MetricReport) -> str:
    """Metrics report CSV with one row per AU plus a final AVG row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["au", "f1_binary", "f1_micro", "f1_macro", "auc", "tp", "fp", "fn", "tn", "flags"]
    )

    def fmt(v: float) -> str:
        return f"{v:.9f}"

    for r in report.rows:
        flags = "|".join(m for m in _METRICS if getattr(r, m).degenerate)
        c = r.confusion
        w.writerow(
            [
                r.au,
                fmt(r.f1_binary.value),
                fmt(r.f1_micro.value),
                fmt(r.f1_macro.value),
                fmt(r.auc.value),
                c.tp if c else "",
                c.fp if c else "",
                c.fn if c else "",
                c.tn if c else "",
                flags,
            ]
        )
    avgs = {m: report.average(m) for m in _METRICS}
    flags = "|".join(m for m in _METRICS if avgs[m].degenerate)
    w.writerow(
        ["AVG", *(fmt(avgs[m].value) for m in _METRICS), "", "", "", "", flags]
    )
    return buf.getvalue()
