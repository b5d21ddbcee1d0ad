"""Greedy Bandits with Sampled Context (GB-SC) and the UCI Mushroom bandit task."""

__version__ = "0.1.0"

from .core import (
    NIL,
    ActionConfidence,
    Arm,
    BetaParams,
    Confidence,
    ConfigurationError,
    Decision,
    DimensionMismatchError,
    GbscModel,
    action_confidences,
    advance_epoch,
    confidence_of,
    export_priors,
    new_model,
    sample_node,
    select_arm,
    update,
)
from .mushroom import Dataset, Label, Mushroom, load_dataset
from .experiment import (
    MaskConfig,
    MaskMode,
    TrainingConfig,
    evaluate,
    mask_experiment,
    random_policy_curve,
    sweep_k,
    train,
    utilization_counts,
)
