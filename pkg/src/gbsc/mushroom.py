"""UCI Mushroom environment.

Eating a safe mushroom pays +5. Eating a poisonous one pays +5 or -35 with
equal probability. Not eating pays 0.

Two reference policies define regret. The legacy oracle eats exactly the
safe mushrooms. The risk-aware oracle also eats a poisonous mushroom
whenever the coin comes up +5, and collects 0 when it would have been -35.
Its expected reward on a poisonous mushroom is therefore 2.5 instead of 0.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import NIL, Arm

SAFE_REWARD = 5.0
POISON_GOOD_REWARD = 5.0
POISON_BAD_REWARD = -35.0
POISON_GOOD_PROBABILITY = 0.5

MISSING_MARKER = "?"

ATTRIBUTE_NAMES = (
    "cap-shape",
    "cap-surface",
    "cap-color",
    "bruises",
    "odor",
    "gill-attachment",
    "gill-spacing",
    "gill-size",
    "gill-color",
    "stalk-shape",
    "stalk-root",
    "stalk-surface-above-ring",
    "stalk-surface-below-ring",
    "stalk-color-above-ring",
    "stalk-color-below-ring",
    "veil-type",
    "veil-color",
    "ring-number",
    "ring-type",
    "spore-print-color",
    "population",
    "habitat",
)
NUM_SUBSETS = len(ATTRIBUTE_NAMES)


class Label(IntEnum):
    SAFE = 0
    POISONOUS = 1


_CLASS_CODES = {"e": Label.SAFE, "p": Label.POISONOUS}
_CLASS_CHARS = {v: k for k, v in _CLASS_CODES.items()}


class DatasetError(ValueError):
    """Problem reading a Mushroom data file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MalformedLineError(DatasetError):
    pass


class UnknownClassError(DatasetError):
    pass


class EmptyFileError(DatasetError):
    pass


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Mushroom:
    label: Label
    context: tuple

    @property
    def poisonous(self) -> bool:
        return self.label == Label.POISONOUS


@dataclass(frozen=True)
class RewardOutcome:
    agent_reward: float
    oracle_reward: float
    legacy_oracle_reward: float


@dataclass(frozen=True, eq=False)
class Dataset:
    mushrooms: tuple
    value_alphabets: tuple
    checksum: str = ""
    poisonous: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        flags = np.fromiter((m.poisonous for m in self.mushrooms), dtype=bool, count=len(self.mushrooms))
        flags.setflags(write=False)
        object.__setattr__(self, "poisonous", flags)

    @classmethod
    def from_mushrooms(cls, mushrooms: Sequence[Mushroom], checksum: str = "") -> "Dataset":
        mushrooms = tuple(mushrooms)
        width = len(mushrooms[0].context) if mushrooms else NUM_SUBSETS
        alphabets = [set() for _ in range(width)]
        for m in mushrooms:
            for s, v in enumerate(m.context):
                if v is not NIL:
                    alphabets[s].add(v)
        return cls(mushrooms, tuple(frozenset(a) for a in alphabets), checksum)

    def __len__(self):
        return len(self.mushrooms)

    def __getitem__(self, i):
        return self.mushrooms[i]

    @property
    def num_subsets(self) -> int:
        return len(self.value_alphabets)

    @property
    def poisonous_fraction(self) -> float:
        return float(self.poisonous.mean()) if len(self) else 0.0

    def contexts(self, indices) -> list:
        return [self.mushrooms[i].context for i in indices]

    def serialize(self) -> str:
        """Render back to the comma-separated UCI layout, one record per line."""
        lines = []
        for m in self.mushrooms:
            fields = [_CLASS_CHARS[m.label]]
            fields += [MISSING_MARKER if v is NIL else v for v in m.context]
            lines.append(",".join(fields))
        return "\n".join(lines) + ("\n" if lines else "")


def parse_dataset(text: str, checksum: str = "") -> Dataset:
    mushrooms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != NUM_SUBSETS + 1:
            raise MalformedLineError(f"expected {NUM_SUBSETS + 1} fields, got {len(fields)}", lineno)
        for col, f in enumerate(fields):
            if len(f) != 1:
                raise MalformedLineError(f"field {col} is {f!r}, expected a single character", lineno)
        label = _CLASS_CODES.get(fields[0])
        if label is None:
            raise UnknownClassError(f"unknown class {fields[0]!r}, expected 'e' or 'p'", lineno)
        context = tuple(NIL if f == MISSING_MARKER else f for f in fields[1:])
        mushrooms.append(Mushroom(label, context))
    if not mushrooms:
        raise EmptyFileError("no records found")
    return Dataset.from_mushrooms(mushrooms, checksum)


def load_dataset(path) -> Dataset:
    """Read an ``agaricus-lepiota.data`` file.

    Raises:
        DatasetError: on empty files, malformed lines or unknown classes.
        OSError: when the file cannot be read.
    """
    data = Path(path).read_bytes()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise DatasetError(f"{path}: not an ASCII file ({exc})") from exc
    return parse_dataset(text, hashlib.sha256(data).hexdigest())


def draw_mushroom(dataset: Dataset, rng: np.random.Generator) -> Mushroom:
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot draw from an empty dataset")
    return dataset.mushrooms[int(rng.integers(len(dataset)))]


def draw_indices(dataset: Dataset, size, rng: np.random.Generator) -> np.ndarray:
    """Uniform draws with replacement; same stream use as repeated :func:`draw_mushroom`."""
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot draw from an empty dataset")
    return rng.integers(len(dataset), size=size)


def rewards_from_coin(poisonous, arm, good):
    """Realised (agent, oracle, legacy) rewards; works on scalars and arrays."""
    poisonous = np.asarray(poisonous, dtype=bool)
    play = np.asarray(arm) == Arm.PLAY
    good = np.asarray(good, dtype=bool)
    eat = np.where(poisonous, np.where(good, POISON_GOOD_REWARD, POISON_BAD_REWARD), SAFE_REWARD)
    agent = np.where(play, eat, 0.0)
    oracle = np.where(poisonous, np.where(good, POISON_GOOD_REWARD, 0.0), SAFE_REWARD)
    legacy = np.where(poisonous, 0.0, SAFE_REWARD)
    return agent, oracle, legacy


def realize_reward(mushroom: Mushroom, arm: Arm, rng: np.random.Generator) -> RewardOutcome:
    """Realise one arm. Always consumes one uniform: the poisonous-eating coin.

    The coin is shared by the agent and both oracles.
    """
    good = rng.random() < POISON_GOOD_PROBABILITY
    agent, oracle, legacy = rewards_from_coin(mushroom.poisonous, arm, good)
    return RewardOutcome(float(agent), float(oracle), float(legacy))


def expected_rewards(mushroom: Mushroom) -> tuple[float, float, float, float]:
    """``(eat, no_eat, oracle, legacy_oracle)`` expected rewards."""
    if not mushroom.poisonous:
        return SAFE_REWARD, 0.0, SAFE_REWARD, SAFE_REWARD
    p = POISON_GOOD_PROBABILITY
    eat = p * POISON_GOOD_REWARD + (1 - p) * POISON_BAD_REWARD
    return eat, 0.0, p * POISON_GOOD_REWARD, 0.0


# expected regret against the risk-aware oracle, indexed [poisonous, arm]
REGRET_TABLE = np.array(
    [
        [SAFE_REWARD, 0.0],
        [
            POISON_GOOD_PROBABILITY * POISON_GOOD_REWARD,
            POISON_GOOD_PROBABILITY * POISON_GOOD_REWARD
            - (POISON_GOOD_PROBABILITY * POISON_GOOD_REWARD + (1 - POISON_GOOD_PROBABILITY) * POISON_BAD_REWARD),
        ],
    ]
)


def expected_regret(mushroom: Mushroom, arm: Arm) -> float:
    eat, no_eat, oracle, _ = expected_rewards(mushroom)
    return oracle - (eat if arm == Arm.PLAY else no_eat)


def expected_regret_array(poisonous, arms) -> np.ndarray:
    return REGRET_TABLE[np.asarray(poisonous, dtype=int), np.asarray(arms, dtype=int)]


def oracle_gap_experiment(dataset: Dataset, replicates: int, arms_per_replicate: int, rng: np.random.Generator):
    """Summed (risk-aware oracle - legacy oracle) reward over a run of arms.

    Each replicate draws ``arms_per_replicate`` mushrooms with replacement and
    realises one coin per arm. Returns the mean and the sample (n - 1)
    standard deviation over replicates.
    """
    if replicates < 2:
        raise ValueError(f"replicates must be at least 2, got {replicates}")
    if arms_per_replicate < 0:
        raise ValueError(f"arms_per_replicate must be non-negative, got {arms_per_replicate}")
    idx = draw_indices(dataset, (replicates, arms_per_replicate), rng)
    good = rng.random((replicates, arms_per_replicate)) < POISON_GOOD_PROBABILITY
    _, oracle, legacy = rewards_from_coin(dataset.poisonous[idx], Arm.NO_PLAY, good)
    gaps = (oracle - legacy).sum(axis=1)
    return float(gaps.mean()), float(gaps.std(ddof=1))


def analytic_oracle_gap(dataset: Dataset, arms_per_replicate: int) -> float:
    return arms_per_replicate * dataset.poisonous_fraction * POISON_GOOD_PROBABILITY * POISON_GOOD_REWARD


def analytic_random_regret(dataset: Dataset, arms: int) -> float:
    """Expected cumulative regret of a fair-coin policy over ``arms`` draws."""
    p = dataset.poisonous_fraction
    per_arm = (1 - p) * REGRET_TABLE[0].mean() + p * REGRET_TABLE[1].mean()
    return arms * per_arm


def analytic_regret_floor(dataset: Dataset, arms: int) -> float:
    """Expected cumulative regret of the legacy oracle policy (eat iff safe)."""
    return arms * dataset.poisonous_fraction * REGRET_TABLE[1, Arm.NO_PLAY]


def class_counts(dataset: Dataset) -> dict:
    poison = int(dataset.poisonous.sum())
    return {Label.SAFE: len(dataset) - poison, Label.POISONOUS: poison}
