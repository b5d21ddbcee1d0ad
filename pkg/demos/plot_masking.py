"""
Hiding features at evaluation time
==================================

Masked features are replaced by the nil node, which has seen nothing during
training. Random masking spreads the rate evenly over the subsets, priority
masking concentrates it on the ones the model uses most. The masked and
intact evaluations share every other random draw, so rate 0 reproduces the
intact regret exactly.
"""
from gbsc.experiment import MaskConfig, TrainingConfig, mask_experiment, utilization_counts

from _data import dataset

ds = dataset()
config = TrainingConfig(k=3, seed=5)
replicates = 5
usage = utilization_counts(config, ds, replicates)

print("rate   random delta  priority delta")
for rate in (0.0, 0.25, 0.5, 1.0):
    random = mask_experiment(config, MaskConfig.random(rate, ds.num_subsets), ds, replicates)
    priority = mask_experiment(config, MaskConfig.priority(rate, usage), ds, replicates)
    print(f"{rate:4.2f}   {random.delta:12.2f}  {priority.delta:14.2f}")
