"""Greedy Bandits with Sampled Context.

Every context subset (one categorical feature) owns a family of Beta
posteriors, one per observed value plus a reserved nil node for missing
values. To decide on an arm, the node activated in each subset is sampled
once, the sample is folded about 0.5 into a confidence for the action it
favours, and each action's confidence is the mean of its ``k`` largest
confidences. An epsilon-greedy rule with ``epsilon = 1 / epoch`` then picks
between the argmax action and a fair coin.

Random stream layout
--------------------
One decision for a model with ``S`` subsets consumes exactly ``S + 2``
uniforms from the generator, in this order: one per subset for the node
samples, one for the exploration test and one for the exploration coin.
The coin is drawn even when the arm is exploited so that every decision
costs the same number of draws. Beta variates are produced by inversion
(``scipy.special.betaincinv``) so each one costs a single uniform.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Hashable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import betaincinv

NIL = None
"""Marker for a missing or masked context value."""

NEUTRAL_CONFIDENCE = 0.5
"""Action confidence reported for an action whose pool is empty."""

# flat slot 0 holds an untouched Beta(1, 1) used for values never seen in an update
_PRIOR_SLOT = 0


class Arm(IntEnum):
    NO_PLAY = 0
    PLAY = 1


class ConfigurationError(ValueError):
    """Invalid model or experiment parameters."""


class DimensionMismatchError(ValueError):
    """Context length differs from the model's subset count."""


@dataclass(frozen=True)
class BetaParams:
    """Pseudo-counts of one node; ``alpha`` favours play, ``beta`` no-play."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 1.0:
                raise ConfigurationError(f"{name} must be a finite value >= 1, got {value}")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class ContextSubsetModel:
    """Snapshot of the nodes of one context subset, keyed by value (``NIL`` included)."""

    index: int
    nodes: dict


@dataclass(frozen=True)
class Confidence:
    subset_index: int
    action: Arm
    value: float
    raw_sample: float


@dataclass(frozen=True)
class ActionConfidence:
    play: float
    no_play: float
    play_contributors: tuple = ()
    no_play_contributors: tuple = ()


@dataclass(frozen=True)
class Decision:
    arm: Arm
    explored: bool
    confidences: ActionConfidence


@dataclass
class DecisionBatch:
    """Vectorised decisions for ``n`` contexts.

    Contributor masks have shape ``(n, num_subsets)`` and mark the subsets
    whose confidence entered the top-k average of each action.
    """

    arms: np.ndarray
    explored: np.ndarray
    play: np.ndarray
    no_play: np.ndarray
    play_contributors: np.ndarray
    no_play_contributors: np.ndarray
    samples: np.ndarray

    def __len__(self):
        return len(self.arms)

    def decision(self, i: int) -> Decision:
        conf = ActionConfidence(
            play=float(self.play[i]),
            no_play=float(self.no_play[i]),
            play_contributors=tuple(np.flatnonzero(self.play_contributors[i]).tolist()),
            no_play_contributors=tuple(np.flatnonzero(self.no_play_contributors[i]).tolist()),
        )
        return Decision(Arm(int(self.arms[i])), bool(self.explored[i]), conf)


class GbscModel:
    """Per-subset Beta posteriors plus the top-k size and the epoch counter.

    Node parameters live in two flat arrays; each subset maps its values to
    slots in those arrays. Nil nodes are allocated at construction, other
    values get a slot the first time they take part in an update. Until
    then they are sampled from the shared Beta(1, 1) prior slot.
    """

    def __init__(self, num_subsets: int, k: int):
        if int(num_subsets) != num_subsets or num_subsets < 1:
            raise ConfigurationError(f"num_subsets must be a positive integer, got {num_subsets}")
        if int(k) != k or not 1 <= k <= num_subsets:
            raise ConfigurationError(
                f"k must be an integer in [1, {num_subsets}] (number of context subsets), got {k}"
            )
        self.num_subsets = int(num_subsets)
        self.k = int(k)
        self.epoch = 1
        capacity = 1 + 16 * self.num_subsets
        self._alpha = np.ones(capacity)
        self._beta = np.ones(capacity)
        self._size = 1
        self._slots: list[dict] = [dict() for _ in range(self.num_subsets)]
        for s in range(self.num_subsets):
            self._slots[s][NIL] = self._allocate()

    def _allocate(self) -> int:
        if self._size == len(self._alpha):
            self._alpha = np.concatenate([self._alpha, np.ones(len(self._alpha))])
            self._beta = np.concatenate([self._beta, np.ones(len(self._beta))])
        slot = self._size
        self._size += 1
        return slot

    def _check_length(self, context: Sequence) -> None:
        if len(context) != self.num_subsets:
            raise DimensionMismatchError(
                f"context has {len(context)} entries, model has {self.num_subsets} subsets"
            )

    def encode(self, context: Sequence[Optional[Hashable]]) -> np.ndarray:
        """Slot of the activated node in every subset, without creating nodes."""
        self._check_length(context)
        return np.fromiter(
            (slots.get(v, _PRIOR_SLOT) for slots, v in zip(self._slots, context)),
            dtype=np.intp,
            count=self.num_subsets,
        )

    def encode_many(self, contexts: Iterable[Sequence]) -> np.ndarray:
        rows = [self.encode(c) for c in contexts]
        if not rows:
            return np.empty((0, self.num_subsets), dtype=np.intp)
        return np.vstack(rows)

    def register(self, context: Sequence[Optional[Hashable]]) -> np.ndarray:
        """Like :meth:`encode` but allocates Beta(1, 1) nodes for unseen values."""
        self._check_length(context)
        out = np.empty(self.num_subsets, dtype=np.intp)
        for s, v in enumerate(context):
            slots = self._slots[s]
            slot = slots.get(v)
            if slot is None:
                slot = slots[v] = self._allocate()
            out[s] = slot
        return out

    def nil_slots(self) -> np.ndarray:
        return np.array([slots[NIL] for slots in self._slots], dtype=np.intp)

    def params(self, subset_index: int, value) -> BetaParams:
        """Posterior of a node; unseen values report the Beta(1, 1) prior."""
        slot = self._slots[subset_index].get(value, _PRIOR_SLOT)
        return BetaParams(float(self._alpha[slot]), float(self._beta[slot]))

    @property
    def subsets(self) -> list[ContextSubsetModel]:
        return [
            ContextSubsetModel(s, {v: self.params(s, v) for v in _ordered_values(slots)})
            for s, slots in enumerate(self._slots)
        ]

    @property
    def exploration_rate(self) -> float:
        return 1.0 / self.epoch

    def node_count(self) -> int:
        return sum(len(slots) for slots in self._slots)

    def copy(self) -> "GbscModel":
        other = GbscModel.__new__(GbscModel)
        other.num_subsets = self.num_subsets
        other.k = self.k
        other.epoch = self.epoch
        other._alpha = self._alpha.copy()
        other._beta = self._beta.copy()
        other._size = self._size
        other._slots = [dict(slots) for slots in self._slots]
        return other

    def __repr__(self):
        return (
            f"GbscModel(num_subsets={self.num_subsets}, k={self.k}, "
            f"epoch={self.epoch}, nodes={self.node_count()})"
        )


def _ordered_values(slots: dict) -> list:
    # nil first, then values in sorted order
    rest = sorted((v for v in slots if v is not NIL), key=lambda v: (type(v).__name__, v))
    return [NIL, *rest]


def new_model(num_subsets: int, k: int) -> GbscModel:
    return GbscModel(num_subsets, k)


def sample_node(params: BetaParams, rng: np.random.Generator) -> float:
    """Draw once from ``Beta(alpha, beta)`` by inversion; consumes one uniform."""
    return float(betaincinv(params.alpha, params.beta, rng.random()))


def confidence_of(raw_sample: float, subset_index: int) -> Confidence:
    if raw_sample >= 0.5:
        return Confidence(subset_index, Arm.PLAY, float(raw_sample), float(raw_sample))
    return Confidence(subset_index, Arm.NO_PLAY, 1.0 - raw_sample, float(raw_sample))


def pooled_confidence(values: Iterable[float], k: int) -> float:
    """Mean of the ``k`` largest values, of all of them if fewer, 0.5 if none."""
    top = sorted(values, reverse=True)[:k]
    if not top:
        return NEUTRAL_CONFIDENCE
    return sum(top) / len(top)


def _top_k(conf: np.ndarray, member: np.ndarray, k: int):
    """Per-row mean of the k largest ``conf`` among ``member`` columns.

    Ties keep the lower subset index. Returns the means and the contributor mask.
    """
    n, S = conf.shape
    key = np.where(member, conf, -1.0)
    order = np.argsort(-key, axis=1, kind="stable")[:, :k]
    rows = np.arange(n)[:, None]
    chosen = member[rows, order]
    picked = np.where(chosen, conf[rows, order], 0.0)
    counts = chosen.sum(axis=1)
    # left-to-right in descending order, bit-identical to a plain Python sum
    total = np.zeros(n)
    for j in range(picked.shape[1]):
        total += picked[:, j]
    means = np.full(n, NEUTRAL_CONFIDENCE)
    nz = counts > 0
    means[nz] = total[nz] / counts[nz]
    contributors = np.zeros((n, S), dtype=bool)
    contributors[rows, order] = chosen
    return means, contributors


def pool_samples(samples: np.ndarray, k: int):
    """Fold raw node samples into confidences and average the top ``k`` per action.

    ``samples`` has shape ``(n, num_subsets)``. Returns
    ``(play, no_play, play_contributors, no_play_contributors)``.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    favours_play = samples >= 0.5
    conf = np.where(favours_play, samples, 1.0 - samples)
    play, play_mask = _top_k(conf, favours_play, k)
    no_play, no_play_mask = _top_k(conf, ~favours_play, k)
    return play, no_play, play_mask, no_play_mask


def decide_encoded(model: GbscModel, slots: np.ndarray, uniforms: np.ndarray) -> DecisionBatch:
    """Decisions for pre-encoded contexts given their ``(n, S + 2)`` uniforms.

    Posteriors are read, never written.
    """
    slots = np.atleast_2d(slots)
    uniforms = np.atleast_2d(uniforms)
    S = model.num_subsets
    if slots.shape[1] != S or uniforms.shape != (len(slots), S + 2):
        raise DimensionMismatchError(
            f"expected slots (n, {S}) and uniforms (n, {S + 2}), "
            f"got {slots.shape} and {uniforms.shape}"
        )
    samples = betaincinv(model._alpha[slots], model._beta[slots], uniforms[:, :S])
    play, no_play, play_mask, no_play_mask = pool_samples(samples, model.k)
    explored = uniforms[:, S] < 1.0 / model.epoch
    coin = np.where(uniforms[:, S + 1] < 0.5, Arm.PLAY, Arm.NO_PLAY)
    greedy = np.where(play > no_play, Arm.PLAY, Arm.NO_PLAY)
    arms = np.where(explored, coin, greedy)
    return DecisionBatch(arms, explored, play, no_play, play_mask, no_play_mask, samples)


def decide_one(model: GbscModel, slots: np.ndarray, uniforms: np.ndarray) -> int:
    """Scalar counterpart of :func:`decide_encoded` for one context; returns the arm.

    Same draws, same arm; avoids array overhead in sequential training.
    """
    S = model.num_subsets
    samples = betaincinv(model._alpha[slots], model._beta[slots], uniforms[:S]).tolist()
    if uniforms[S] < 1.0 / model.epoch:
        return Arm.PLAY if uniforms[S + 1] < 0.5 else Arm.NO_PLAY
    play = sorted((x for x in samples if x >= 0.5), reverse=True)[: model.k]
    no_play = sorted((1.0 - x for x in samples if x < 0.5), reverse=True)[: model.k]
    play_conf = sum(play) / len(play) if play else NEUTRAL_CONFIDENCE
    no_play_conf = sum(no_play) / len(no_play) if no_play else NEUTRAL_CONFIDENCE
    return Arm.PLAY if play_conf > no_play_conf else Arm.NO_PLAY


def select_many(model: GbscModel, slots: np.ndarray, rng: np.random.Generator) -> DecisionBatch:
    """Draw uniforms for ``len(slots)`` decisions and decide them in one pass.

    Consumes the stream exactly as that many consecutive :func:`select_arm` calls.
    """
    slots = np.atleast_2d(slots)
    uniforms = rng.random((len(slots), model.num_subsets + 2))
    return decide_encoded(model, slots, uniforms)


def action_confidences(model: GbscModel, context: Sequence, rng: np.random.Generator) -> ActionConfidence:
    """Sample every activated node once and pool the confidences per action.

    Consumes ``num_subsets`` uniforms.
    """
    slots = model.encode(context)
    samples = betaincinv(model._alpha[slots], model._beta[slots], rng.random(model.num_subsets))
    play, no_play, play_mask, no_play_mask = pool_samples(samples[None, :], model.k)
    return ActionConfidence(
        float(play[0]),
        float(no_play[0]),
        tuple(np.flatnonzero(play_mask[0]).tolist()),
        tuple(np.flatnonzero(no_play_mask[0]).tolist()),
    )


def select_arm(model: GbscModel, context: Sequence, rng: np.random.Generator) -> Decision:
    """Epsilon-greedy choice with ``epsilon = 1 / model.epoch``.

    Exploits when a uniform draw is at least ``1 / epoch``, otherwise flips a
    fair coin. An exact tie between the two action confidences goes to
    ``Arm.NO_PLAY``.
    """
    return select_many(model, model.encode(context)[None, :], rng).decision(0)


def update(model: GbscModel, context: Sequence, decision: Decision | Arm, reward: float) -> None:
    """Reward-scaled posterior update of every activated node.

    Positive rewards add to ``alpha``, negative ones add their magnitude to
    ``beta``. No-play arms leave the model unchanged.
    """
    if not np.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward}")
    arm = decision.arm if isinstance(decision, Decision) else Arm(decision)
    slots = model.register(context)
    if arm != Arm.PLAY or reward == 0:
        return
    if reward > 0:
        model._alpha[slots] += reward
    else:
        model._beta[slots] -= reward


def advance_epoch(model: GbscModel) -> None:
    model.epoch += 1


def export_priors(model: GbscModel) -> list[tuple]:
    """All nodes as ``(subset_index, value, alpha, beta)`` rows.

    Rows are ordered by subset, then nil first, then values sorted.
    """
    rows = []
    for subset in model.subsets:
        for value, p in subset.nodes.items():
            rows.append((subset.index, value, p.alpha, p.beta))
    return rows
