#!/usr/bin/env python3
"""A tour of the Wilcoxon-Mann-Whitney machinery.

The two-tailed non-paired U-test is the study's significance instrument.
Small tie-free samples get the exact enumerated distribution; larger or
tied samples get the tie-corrected normal approximation with continuity
correction. This script shows both modes, their agreement, and what the
test does under the null hypothesis.
"""

import numpy as np

from reprobench import mann_whitney_u, macro_metrics, rank_with_ties
from reprobench.stats import Mode

print("== 1. Ranks with mid-rank ties ==")
sample = [7, 3, 7, 1, 3]
print(f"  values {sample} -> ranks {rank_with_ties(sample)}")

print()
print("== 2. Exact test on fully separated samples ==")
result = mann_whitney_u([1, 2, 3], [4, 5, 6])
print(f"  A=[1,2,3] B=[4,5,6]: u={result.u_statistic}, p={result.p_value:.5f} "
      f"({result.method.value})")
print("  (20 equally likely rank assignments, 2 as extreme as this one)")

print()
print("== 3. Interleaved samples are far from significant ==")
result = mann_whitney_u([1, 3, 5, 7], [2, 4, 6, 8])
print(f"  u={result.u_statistic}, p={result.p_value:.5f}")

print()
print("== 4. Exact vs normal approximation at n=10 ==")
rng = np.random.default_rng(7)
pool = rng.permutation(500)[:20]
a, b = sorted(pool[:10]), sorted(pool[10:])
exact = mann_whitney_u(a, b, Mode.EXACT)
approx = mann_whitney_u(a, b, Mode.NORMAL_APPROX)
print(f"  exact p={exact.p_value:.5f}  approx p={approx.p_value:.5f}  "
      f"|diff|={abs(exact.p_value - approx.p_value):.5f}")

print()
print("== 5. Identical samples: the degenerate guard ==")
result = mann_whitney_u([0.7] * 10, [0.7] * 10)
print(f"  p={result.p_value}, degenerate={result.degenerate}")

print()
print("== 6. Null-hypothesis calibration at campaign scale ==")
rejections = 0
trials = 200
for _ in range(trials):
    a = rng.normal(0.7, 0.003, size=50)
    b = rng.normal(0.7, 0.003, size=50)
    if mann_whitney_u(a, b).p_value < 0.05:
        rejections += 1
print(f"  {rejections}/{trials} rejections at alpha=0.05 "
      f"(rate {rejections / trials:.3f}; should hover near 0.05)")

print()
print("== 7. Macro-averaged metrics from a confusion matrix ==")
confusion = [[41, 5, 4], [6, 38, 6], [3, 4, 43]]
metrics = macro_metrics(confusion)
print(f"  accuracy={metrics.accuracy:.4f} precision={metrics.precision:.4f} "
      f"recall={metrics.recall:.4f} f1={metrics.f1:.4f}")
print("  (each class weighted equally, regardless of its support)")
