"""
How far apart are the two oracles?
==================================

The legacy oracle refuses every poisonous mushroom. The current oracle eats
a poisonous mushroom whenever the coin comes up favourable, collecting 5
points half the time. Over 50 arms the expected gap is the poisonous fraction
times 50 times 2.5.
"""
import numpy as np

from gbsc.mushroom import analytic_oracle_gap, oracle_gap_experiment

from _data import dataset

ds = dataset()
print(f"poisonous fraction {ds.poisonous_fraction:.4f}")
print(f"analytic gap over 50 arms {analytic_oracle_gap(ds, 50):.3f}")

# the Monte Carlo estimate tightens as replicates grow
rng = np.random.default_rng(0)
for replicates in (100, 1000, 10_000):
    mean, std = oracle_gap_experiment(ds, replicates, 50, rng)
    print(f"{replicates:>6} replicates: mean {mean:7.3f}  stddev {std:6.3f}  se {std / np.sqrt(replicates):.3f}")
