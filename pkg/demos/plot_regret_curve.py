"""
Regret curve of a single training run
=====================================

Train GB-SC with k=2 for 1500 arms and look at the cumulative expected
regret of a 50-arm evaluation after every epoch. The first point is taken
at epoch 1, where every decision is a coin flip, so it sits near the random
policy. The floor is the regret of a policy that always picks the better arm.
"""
import numpy as np

from gbsc.experiment import TrainingConfig, random_policy_curve, train
from gbsc.mushroom import analytic_random_regret, analytic_regret_floor

from _data import dataset

ds = dataset()
config = TrainingConfig(k=2, seed=1)
model, curve = train(config, ds)

_, random_cum = random_policy_curve(ds, config.eval_arms, 1000, np.random.default_rng(0))
print(f"random policy   {random_cum:7.1f} (analytic {analytic_random_regret(ds, 50):.1f})")
print(f"regret floor    {analytic_regret_floor(ds, 50):7.1f}")
print()
print(" arms  epsilon  cumulative")
for i, point in enumerate(curve.points):
    print(f"{point.arms_completed:5d}  {1 / (i + 1):7.3f}  {point.cumulative:10.1f}")

print(f"\nnodes learned: {model.node_count()}")
