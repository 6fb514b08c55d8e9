"""Two evaluation pitfalls made concrete.

1. A predictor that marks every AU active in every frame gets F1-binary
   2p/(1+p) for free at base rate p, so on common AUs it looks competitive.
2. Pooling predictions over folds is not the same as averaging per-fold
   scores; F1 is not decomposable.

Run: python demos/03_metrics_pitfalls.py
"""

import numpy as np

from aupatterns.analytics import ones_baseline
from aupatterns.annotations import AuRegistry
from aupatterns.metrics import FoldScores, confusion, f1_binary, pooled_report
from aupatterns.mining import BaseRates

print("=== pitfall 1: the all-active control ===")
rates = BaseRates((1, 2, 3), (0.1, 0.4, 0.7))
report = ones_baseline(rates)
print("base rate ->  f1_binary  f1_micro  f1_macro  auc")
for row, p in zip(report.rows, rates.rates):
    print(f"   {p:.1f}     ->   {row.f1_binary.value:.4f}    {row.f1_micro.value:.4f}"
          f"    {row.f1_macro.value:.4f}   {row.auc.value}")
print("At p=0.7 the no-skill control already scores F1-binary 0.82.\n")

print("=== pitfall 2: pooled vs per-fold-averaged F1 ===")
reg = AuRegistry((1,))
parts = [
    (np.array([[1], [0]]), np.array([[0.0], [1.0]])),   # fold 1: everything wrong
    (np.array([[1], [0]]), np.array([[0.0], [1.0]])),   # fold 2: everything wrong
    (np.array([[1], [1]]), np.array([[1.0], [1.0]])),   # fold 3: everything right
]
folds = [
    FoldScores(tuple((f"S{i}", "T", j) for j in range(2)), truth, scores)
    for i, (truth, scores) in enumerate(parts)
]
per_fold = [pooled_report([f], reg).rows[0].f1_binary.value for f in folds]
pooled = pooled_report(folds, reg).rows[0].f1_binary.value
print(f"per-fold F1-binary: {per_fold}")
print(f"mean of folds:      {np.mean(per_fold):.4f}")
print(f"pooled F1-binary:   {pooled:.4f}")
print("Reports here always pool the concatenated predictions.\n")

print("=== bonus: F1 of a coin flip vs prevalence ===")
rng = np.random.default_rng(0)
for p in (0.1, 0.5):
    truth = (rng.random(10_000) < p).astype(int)
    pred = rng.integers(0, 2, 10_000)
    print(f"p={p}: random-guess F1-binary = {f1_binary(confusion(truth, pred)).value:.4f}")
