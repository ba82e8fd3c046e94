"""Choosing the decision threshold for the "easy" class.

Only the splits between adjacent distinct probabilities matter, so the sweep
tries 0, 1 and every midpoint and keeps the best F1.
"""
import numpy as np

from csfi.metrics import at_threshold, f1_score, threshold_report, threshold_sweep

p = np.array([0.9, 0.6, 0.4])
easy = np.array([True, True, False])
t, best = threshold_sweep(p, easy)
print(f"best threshold {t} gives F1 {best.f1}")

rng = np.random.default_rng(0)
easy = rng.random(500) < 0.5
p = np.clip(0.6 + 0.25 * easy - 0.25 * ~easy + rng.normal(0, 0.2, 500), 0, 1)
report = threshold_report(p, easy, ["0.5", "0.66", "best"], positive_class="easy")
for row in report.rows:
    print(f"{row.name:5s} t={row.threshold:.3f} acc {row.accuracy:.3f} P {row.precision:.3f} "
          f"R {row.recall:.3f} F1 {row.f1:.3f}")

# Reported precision/recall pairs reproduce their F1 column.
print("\nF1(0.669, 1.0) =", round(f1_score(0.669, 1.0), 4))
print("F1(0.989, 1.0) =", round(f1_score(0.989, 1.0), 4))
print("at 0.66 on the toy set:", at_threshold([0.9, 0.6, 0.4], [True, True, False], 0.66).f1)
