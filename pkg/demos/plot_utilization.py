"""
Which features does the model lean on?
======================================

A subset is utilised when its confidence lands in the top-k pool of an
action. Counting this over evaluation decisions gives a rough importance
score. Features such as odor, whose values separate the classes almost
perfectly, tend to dominate the counts.
"""
from gbsc.core import export_priors
from gbsc.experiment import TrainingConfig, train, utilization_counts
from gbsc.mushroom import ATTRIBUTE_NAMES

from _data import dataset

ds = dataset()
config = TrainingConfig(k=3, seed=11)
table = utilization_counts(config, ds, 5)

order = table.totals.argsort()[::-1]
print("subset                     play  no-play")
for s in order:
    print(f"{ATTRIBUTE_NAMES[s]:<25} {table.play[s]:5d}  {table.no_play[s]:7d}")

# posterior means of the odor nodes in one trained model
model, _ = train(config, ds, record_curve=False)
odor = ATTRIBUTE_NAMES.index("odor")
print("\nodor posteriors (value, mean of play)")
for subset, value, alpha, beta in export_priors(model):
    if subset == odor:
        print(f"  {value!s:>4}  {alpha / (alpha + beta):.3f}")
