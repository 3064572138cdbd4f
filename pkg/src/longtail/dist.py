"""Class priors, long-tail count profiles and synthetic Gaussian data.

Label convention: classes are 0-indexed ``0..L-1``. Binary tasks written
with labels {+1, -1} map +1 -> 0 and -1 -> 1, so the positive class of a
:class:`GaussianTask` is class 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

POSITIVE = 0
NEGATIVE = 1


@dataclass(frozen=True)
class ClassPriors:
    """Normalised label marginal over ``L`` classes."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 1:
            raise ValueError("priors must be a non-empty vector")
        if not np.all(np.isfinite(probs)) or np.any(probs <= 0):
            raise ValueError(f"priors must be strictly positive, got {probs}")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError(f"priors must sum to 1, got sum {probs.sum()!r}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, num_classes: int) -> ClassPriors:
        return cls(np.full(num_classes, 1.0 / num_classes))

    @property
    def num_classes(self) -> int:
        return self.probs.size

    def log(self) -> np.ndarray:
        return np.log(self.probs)

    def __len__(self) -> int:
        return self.probs.size


def priors_from_counts(counts) -> ClassPriors:
    """Empirical class frequencies from per-class counts (all must be >= 1)."""
    counts = np.asarray(counts)
    if counts.ndim != 1 or counts.size < 1:
        raise ValueError("counts must be a non-empty vector")
    if np.any(counts < 1):
        raise ValueError(f"every class count must be >= 1, got {counts.tolist()}")
    counts = counts.astype(np.float64)
    return ClassPriors(counts / counts.sum())


class ProfileKind(str, enum.Enum):
    EXP = "exp"
    STEP = "step"


@dataclass(frozen=True)
class LongTailProfile:
    """Per-class count profile with imbalance ratio ``max/min``.

    ``EXP`` decays geometrically from ``max_count`` to ``max_count / ratio``;
    ``STEP`` gives the first half of the classes ``max_count`` and the rest
    ``max_count / ratio``.
    """

    kind: ProfileKind
    num_classes: int
    max_count: int
    imbalance_ratio: float

    def __post_init__(self):
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if self.imbalance_ratio < 1:
            raise ValueError("imbalance ratio must be >= 1")
        if self.max_count < 1:
            raise ValueError("max_count must be >= 1")


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def profile_counts(profile: LongTailProfile) -> np.ndarray:
    L = profile.num_classes
    if L < 2:
        raise ValueError("a long-tail profile needs at least 2 classes")
    rho = float(profile.imbalance_ratio)
    if profile.kind is ProfileKind.EXP:
        exponents = -np.arange(L) / (L - 1)
        counts = _round_half_up(profile.max_count * rho**exponents)
    else:
        head = math.ceil(L / 2)
        counts = np.full(L, profile.max_count, dtype=np.int64)
        counts[head:] = _round_half_up(profile.max_count / rho)
    return np.maximum(counts, 1)


@dataclass(frozen=True)
class GaussianTask:
    """Binary task with isotropic Gaussian class-conditionals.

    Defaults are the long-tail benchmark setting: means ``+-(1, 1)``,
    unit variance and a 5% positive class.
    """

    mean_plus: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0]))
    mean_minus: np.ndarray = field(default_factory=lambda: np.array([-1.0, -1.0]))
    sigma: float = 1.0
    prior_plus: float = 0.05

    def __post_init__(self):
        mp = np.array(self.mean_plus, dtype=np.float64)
        mm = np.array(self.mean_minus, dtype=np.float64)
        if mp.shape != mm.shape or mp.ndim != 1:
            raise ValueError("class means must be vectors of equal length")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.prior_plus < 1:
            raise ValueError("prior_plus must lie in (0, 1)")
        mp.setflags(write=False)
        mm.setflags(write=False)
        object.__setattr__(self, "mean_plus", mp)
        object.__setattr__(self, "mean_minus", mm)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "prior_plus", float(self.prior_plus))

    @property
    def dim(self) -> int:
        return self.mean_plus.size

    @property
    def means(self) -> np.ndarray:
        """Class means stacked in label order (row 0 is the positive class)."""
        return np.stack([self.mean_plus, self.mean_minus])

    @property
    def priors(self) -> ClassPriors:
        return ClassPriors([self.prior_plus, 1.0 - self.prior_plus])


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("features must be N x D and labels length N")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError("labels out of range")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def __len__(self) -> int:
        return self.labels.size


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator seeded through ``SeedSequence``.

    ``seed`` may be an int or a sequence of ints (e.g. ``[base, trial]``),
    which is how independent per-trial streams are derived.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def derive_seeds(seed: int, *keys: int, n: int = 1) -> list[int]:
    """Deterministic child seeds for the stream keyed by ``(seed, *keys)``."""
    state = np.random.SeedSequence([seed, *keys]).generate_state(n, dtype=np.uint32)
    return [int(s) for s in state]


def sample_gaussian(task: GaussianTask, n: int, seed) -> LabeledDataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    labels = np.where(rng.random(n) < task.prior_plus, POSITIVE, NEGATIVE)
    noise = rng.standard_normal((n, task.dim))
    features = task.means[labels] + task.sigma * noise
    return LabeledDataset(features, labels, 2)


def circle_means(num_classes: int, radius: float = 3.0) -> np.ndarray:
    """``num_classes`` points equally spaced on a circle in the plane."""
    angles = 2 * np.pi * np.arange(num_classes) / num_classes
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def sample_class_conditional(means, sigma: float, counts, seed) -> LabeledDataset:
    """Exactly ``counts[y]`` isotropic Gaussian draws around ``means[y]``.

    Rows come out in shuffled order.
    """
    means = np.asarray(means, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.int64)
    if means.shape[0] != counts.size:
        raise ValueError("need one mean per class")
    rng = make_rng(seed)
    labels = np.repeat(np.arange(counts.size), counts)
    labels = labels[rng.permutation(labels.size)]
    features = means[labels] + sigma * rng.standard_normal((labels.size, means.shape[1]))
    return LabeledDataset(features, labels, counts.size)
