"""
Choosing k
==========

Sweep the top-k pool size over every possible value and compare the final
cumulative regret. Each k is trained on the same replicate seeds, so the
rows differ only through k.
"""
from gbsc.experiment import TrainingConfig, sweep_k

from _data import dataset

ds = dataset()
rows = sweep_k(range(1, 23), 5, TrainingConfig(seed=3), ds)

print(" k    mean  stddev")
for row in rows:
    print(f"{row.k:2d}  {row.mean:6.1f}  {row.stddev:6.1f}")

best = min(rows, key=lambda r: r.mean)
print(f"\nlowest mean regret at k={best.k}")
