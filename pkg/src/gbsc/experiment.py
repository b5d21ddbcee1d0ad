"""Training, evaluation and the studies built on them.

Seeds
-----
Every stochastic component derives its generator from the run seed through
``numpy.random.SeedSequence(seed, spawn_key=key)``:

* ``(0,)`` training stream (mushroom draws, decisions, reward coins),
* ``(1, p)`` evaluation stream for curve point ``p``,
* ``(2, p)`` masking stream for curve point ``p``,
* ``(3, r)`` seed of replicate ``r`` in multi-replicate studies.

A replicate can therefore be re-run alone with ``replicate_seed(seed, r)``,
and evaluation draws never depend on how much training consumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import core
from .core import Arm, ConfigurationError, GbscModel
from .mushroom import (
    Dataset,
    POISON_BAD_REWARD,
    POISON_GOOD_PROBABILITY,
    POISON_GOOD_REWARD,
    SAFE_REWARD,
    draw_indices,
    expected_regret_array,
)

DEFAULT_SEED = 20200417

_TRAIN_KEY = 0
_EVAL_KEY = 1
_MASK_KEY = 2
_REPLICATE_KEY = 3


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def replicate_seed(seed: int, replicate: int) -> int:
    """64-bit seed of replicate ``replicate`` derived from a master seed."""
    state = np.random.SeedSequence(seed, spawn_key=(_REPLICATE_KEY, replicate)).generate_state(1, np.uint64)
    return int(state[0])


@dataclass(frozen=True)
class TrainingConfig:
    total_training_arms: int = 1500
    epsilon_epoch_length: int = 150
    eval_arms: int = 50
    eval_replicates: int = 10
    k: int = 3
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.total_training_arms < 0:
            raise ConfigurationError("total_training_arms must be non-negative")
        if self.epsilon_epoch_length < 1:
            raise ConfigurationError("epsilon_epoch_length must be positive")
        if self.eval_arms < 0:
            raise ConfigurationError("eval_arms must be non-negative")
        if self.eval_replicates < 1:
            raise ConfigurationError("eval_replicates must be positive")
        if self.k < 1:
            raise ConfigurationError("k must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must fit in an unsigned 64-bit integer")

    @property
    def num_points(self) -> int:
        return self.total_training_arms // self.epsilon_epoch_length


@dataclass(frozen=True)
class CurvePoint:
    arms_completed: int
    per_arm: tuple
    cumulative: float


@dataclass
class RegretCurve:
    points: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    @property
    def final(self) -> Optional[CurvePoint]:
        return self.points[-1] if self.points else None

    def cumulative(self) -> np.ndarray:
        return np.array([p.cumulative for p in self.points])


class MaskMode(Enum):
    NONE = "none"
    RANDOM = "random"
    PRIORITY = "priority"


@dataclass(frozen=True)
class MaskConfig:
    """Evaluation-time masking: subset ``s`` is hidden with probability ``min(1, rate * weights[s])``.

    Use :meth:`random` and :meth:`priority` to build the two standard
    schemes; both have weights summing to one, so ``rate`` is the expected
    number of masked subsets before capping.
    """

    mode: MaskMode = MaskMode.NONE
    rate: float = 0.0
    weights: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ConfigurationError(f"mask rate must be in [0, 1], got {self.rate}")
        if self.mode is not MaskMode.NONE and self.weights is None:
            raise ConfigurationError(f"{self.mode.value} masking needs per-subset weights")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(~np.isfinite(w)) or np.any(w < 0):
                raise ConfigurationError("mask weights must be finite and non-negative")
            if self.mode is MaskMode.PRIORITY and not w.any():
                raise ConfigurationError("priority weights are all zero")

    @classmethod
    def random(cls, rate: float, num_subsets: int) -> "MaskConfig":
        return cls(MaskMode.RANDOM, rate, tuple([1.0 / num_subsets] * num_subsets))

    @classmethod
    def priority(cls, rate: float, utilization) -> "MaskConfig":
        """Weights proportional to total utilisation counts per subset.

        ``utilization`` is a :class:`UtilizationTable` or a per-subset array of counts.
        """
        counts = utilization.totals if isinstance(utilization, UtilizationTable) else utilization
        counts = np.asarray(counts, dtype=float)
        if np.any(counts < 0):
            raise ConfigurationError("utilization counts must be non-negative")
        if not counts.any():
            raise ConfigurationError("priority weights are all zero")
        return cls(MaskMode.PRIORITY, rate, tuple((counts / counts.sum()).tolist()))

    def probabilities(self, num_subsets: int) -> np.ndarray:
        if self.mode is MaskMode.NONE:
            return np.zeros(num_subsets)
        w = np.asarray(self.weights, dtype=float)
        if len(w) != num_subsets:
            raise core.DimensionMismatchError(f"{len(w)} mask weights for {num_subsets} subsets")
        return np.minimum(1.0, self.rate * w)


def _encode_draws(model: GbscModel, dataset: Dataset, idx: np.ndarray) -> np.ndarray:
    # encode each distinct row once
    uniq, inverse = np.unique(idx, return_inverse=True)
    table = model.encode_many(dataset.contexts(uniq))
    return table[inverse.ravel()]


def _evaluate_batch(model, dataset, eval_arms, replicates, rng, mask=None, mask_rng=None):
    n = eval_arms * replicates
    idx = draw_indices(dataset, n, rng)
    slots = _encode_draws(model, dataset, idx)
    uniforms = rng.random((n, model.num_subsets + 2))
    if mask is not None and mask.mode is not MaskMode.NONE:
        if mask_rng is None:
            raise ValueError("masking needs its own random stream")
        hidden = mask_rng.random((n, model.num_subsets)) < mask.probabilities(model.num_subsets)
        slots = np.where(hidden, model.nil_slots()[None, :], slots)
    batch = core.decide_encoded(model, slots, uniforms)
    regret = expected_regret_array(dataset.poisonous[idx], batch.arms)
    return batch, regret.reshape(replicates, eval_arms)


class Evaluation(NamedTuple):
    per_arm: np.ndarray
    cumulative: float
    replicate_cumulative: np.ndarray

    @property
    def standard_error(self) -> float:
        r = self.replicate_cumulative
        return float(r.std(ddof=1) / math.sqrt(len(r))) if len(r) > 1 else float("nan")


def evaluate_detailed(
    model: GbscModel,
    dataset: Dataset,
    eval_arms: int,
    replicates: int,
    rng: np.random.Generator,
    mask: Optional[MaskConfig] = None,
    mask_rng: Optional[np.random.Generator] = None,
) -> Evaluation:
    """:func:`evaluate` plus the cumulative regret of each replicate."""
    if eval_arms == 0:
        return Evaluation(np.zeros(0), 0.0, np.zeros(replicates))
    _, regret = _evaluate_batch(model, dataset, eval_arms, replicates, rng, mask, mask_rng)
    per_arm = regret.mean(axis=0)
    return Evaluation(per_arm, math.fsum(per_arm), regret.sum(axis=1))


def evaluate(
    model: GbscModel,
    dataset: Dataset,
    eval_arms: int,
    replicates: int,
    rng: np.random.Generator,
    mask: Optional[MaskConfig] = None,
    mask_rng: Optional[np.random.Generator] = None,
):
    """Expected regret of the frozen policy at each arm position.

    Runs ``replicates`` sequences of ``eval_arms`` decisions without updating
    the model, using its current exploration rate. Returns the per-position
    mean regret and its sum.

    Masking draws come from ``mask_rng`` so that a masked and an unmasked
    evaluation seeded alike see the same mushrooms and node samples.
    """
    result = evaluate_detailed(model, dataset, eval_arms, replicates, rng, mask, mask_rng)
    return result.per_arm, result.cumulative


def random_policy_curve(dataset: Dataset, eval_arms: int, replicates: int, rng: np.random.Generator):
    """Same accounting as :func:`evaluate` for a fair-coin policy."""
    if eval_arms == 0:
        return np.zeros(0), 0.0
    idx = draw_indices(dataset, (replicates, eval_arms), rng)
    arms = np.where(rng.random((replicates, eval_arms)) < 0.5, Arm.PLAY, Arm.NO_PLAY)
    per_arm = expected_regret_array(dataset.poisonous[idx], arms).mean(axis=0)
    return per_arm, math.fsum(per_arm)


def _apply_update(model: GbscModel, slots: np.ndarray, arm: int, reward: float) -> None:
    if arm != Arm.PLAY or reward == 0:
        return
    if reward > 0:
        model._alpha[slots] += reward
    else:
        model._beta[slots] -= reward


def _eval_point(model, dataset, config, point, mask=None) -> Evaluation:
    return evaluate_detailed(
        model,
        dataset,
        config.eval_arms,
        config.eval_replicates,
        derive_rng(config.seed, _EVAL_KEY, point),
        mask,
        derive_rng(config.seed, _MASK_KEY, point),
    )


def train(config: TrainingConfig, dataset: Dataset, *, record_curve: bool = True):
    """Sequential GB-SC training with a frozen evaluation every epoch.

    Each training arm draws a mushroom, selects an arm, realises the reward
    and updates the model. After every ``epsilon_epoch_length`` arms the
    current policy is evaluated and then the epoch counter advances.

    With ``record_curve=False`` the intermediate evaluations are skipped;
    the model is identical either way.
    """
    model = core.new_model(dataset.num_subsets, config.k)
    curve = RegretCurve()
    rng = derive_rng(config.seed, _TRAIN_KEY)
    n = len(dataset)
    S = model.num_subsets
    contexts = [m.context for m in dataset.mushrooms]
    poisonous = dataset.poisonous.tolist()
    for t in range(1, config.total_training_arms + 1):
        i = int(rng.integers(n))
        # registering first is equivalent: a fresh node is the Beta(1, 1) prior
        slots = model.register(contexts[i])
        arm = core.decide_one(model, slots, rng.random(S + 2))
        good = rng.random() < POISON_GOOD_PROBABILITY
        if arm == Arm.PLAY:
            if not poisonous[i]:
                reward = SAFE_REWARD
            else:
                reward = POISON_GOOD_REWARD if good else POISON_BAD_REWARD
            _apply_update(model, slots, arm, reward)
        if t % config.epsilon_epoch_length == 0:
            point = t // config.epsilon_epoch_length - 1
            if record_curve:
                per_arm, cum, _ = _eval_point(model, dataset, config, point)
                curve.points.append(CurvePoint(t, tuple(per_arm.tolist()), cum))
            core.advance_epoch(model)
    return model, curve


def final_evaluation(model: GbscModel, dataset: Dataset, config: TrainingConfig, mask=None) -> Evaluation:
    """The evaluation a full curve would record at its last point.

    ``model`` must come from ``train(config, ...)``; its epoch counter is
    stepped back by one so the exploration rate matches that point.
    """
    point = max(config.num_points - 1, 0)
    frozen = model.copy()
    frozen.epoch = max(1, model.epoch - 1) if config.num_points else model.epoch
    return _eval_point(frozen, dataset, config, point, mask)


@dataclass(frozen=True)
class KSweepRow:
    k: int
    mean: float
    stddev: float
    replicates: int
    finals: tuple = ()


def _final_regrets(config: TrainingConfig, dataset: Dataset, replicates: int) -> np.ndarray:
    finals = []
    for r in range(replicates):
        cfg = replace(config, seed=replicate_seed(config.seed, r))
        model, _ = train(cfg, dataset, record_curve=False)
        finals.append(final_evaluation(model, dataset, cfg)[1])
    return np.array(finals)


def _mean_std(values: np.ndarray):
    mean = float(values.mean()) if len(values) else float("nan")
    std = float(values.std(ddof=1)) if len(values) > 1 else float("nan")
    return mean, std


def sweep_k(k_values: Sequence[int], replicates: int, base_config: TrainingConfig, dataset: Dataset):
    """Final cumulative expected regret per ``k`` over independent replicates.

    Replicate ``r`` uses ``replicate_seed(base_config.seed, r)`` for every
    ``k``, so the rows share their seeds. With one replicate the standard
    deviation is reported as NaN.
    """
    if replicates < 1:
        raise ConfigurationError("replicates must be positive")
    for k in k_values:
        if not 1 <= k <= dataset.num_subsets:
            raise ConfigurationError(
                f"k must be in [1, {dataset.num_subsets}] (number of context subsets), got {k}"
            )
    rows = []
    for k in k_values:
        finals = _final_regrets(replace(base_config, k=k), dataset, replicates)
        mean, std = _mean_std(finals)
        rows.append(KSweepRow(k, mean, std, replicates, tuple(finals.tolist())))
    return rows


@dataclass
class UtilizationTable:
    """How often each subset entered the top-k pool of each action."""

    play: np.ndarray
    no_play: np.ndarray
    replicates: int
    arms: int

    @property
    def totals(self) -> np.ndarray:
        return self.play + self.no_play


def utilization_counts(config: TrainingConfig, dataset: Dataset, replicates: int) -> UtilizationTable:
    """Count top-k contributors over ``config.eval_arms`` evaluation arms per trained replicate.

    Both actions' pools are counted on every arm, whichever arm was chosen.
    """
    S = dataset.num_subsets
    play = np.zeros(S, dtype=np.int64)
    no_play = np.zeros(S, dtype=np.int64)
    for r in range(replicates):
        cfg = replace(config, seed=replicate_seed(config.seed, r))
        model, _ = train(cfg, dataset, record_curve=False)
        if config.eval_arms == 0:
            continue
        batch, _ = _evaluate_batch(model, dataset, config.eval_arms, 1, derive_rng(cfg.seed, _EVAL_KEY, cfg.num_points))
        play += batch.play_contributors.sum(axis=0)
        no_play += batch.no_play_contributors.sum(axis=0)
    return UtilizationTable(play, no_play, replicates, config.eval_arms)


@dataclass(frozen=True)
class MaskResult:
    masked_cumulative: float
    unmasked_cumulative: float
    delta: float
    masked: tuple = ()
    unmasked: tuple = ()

    @property
    def deltas(self) -> np.ndarray:
        return np.array(self.masked) - np.array(self.unmasked)


def mask_experiment(config: TrainingConfig, mask: MaskConfig, dataset: Dataset, replicates: int) -> MaskResult:
    """Masked versus intact evaluation of the same trained models.

    Both evaluations of a replicate share mushroom draws and node samples;
    only the masking stream differs, so ``rate=0`` gives a zero delta.
    """
    if replicates < 1:
        raise ConfigurationError("replicates must be positive")
    masked, unmasked = [], []
    for r in range(replicates):
        cfg = replace(config, seed=replicate_seed(config.seed, r))
        model, _ = train(cfg, dataset, record_curve=False)
        unmasked.append(final_evaluation(model, dataset, cfg)[1])
        masked.append(final_evaluation(model, dataset, cfg, mask)[1])
    m, u = float(np.mean(masked)), float(np.mean(unmasked))
    return MaskResult(m, u, m - u, tuple(masked), tuple(unmasked))
