"""Mini-batch training of affine softmax classifiers under any margin loss."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from longtail import _kernels
from longtail.dist import LabeledDataset, make_rng
from longtail.loss import MarginSpec, margin_losses


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class LinearModel:
    """Scores ``f[y] = weights[y] @ x + biases[y]``."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=np.float64)
        b = np.array(self.biases, dtype=np.float64)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ValueError(f"weights must be L x D and biases length L, got {W.shape}, {b.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("model parameters must be finite")
        W.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)

    @classmethod
    def zeros(cls, num_classes: int, dim: int) -> LinearModel:
        return cls(np.zeros((num_classes, dim)), np.zeros(num_classes))

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.biases])

    @classmethod
    def from_flat(cls, theta, num_classes: int, dim: int) -> LinearModel:
        theta = np.asarray(theta)
        return cls(theta[: num_classes * dim].reshape(num_classes, dim), theta[num_classes * dim :])


def forward(model: LinearModel, x) -> np.ndarray:
    """Scores for one feature vector (shape ``L``) or a batch (``N x L``)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise ValueError(f"expected {model.dim} features, got {x.shape[-1]}")
    return x @ model.weights.T + model.biases


class OptimizerKind(str, enum.Enum):
    SGD_MOMENTUM = "sgd_momentum"
    ADAM = "adam"


@dataclass(frozen=True)
class OptimizerConfig:
    kind: OptimizerKind = OptimizerKind.SGD_MOMENTUM
    learning_rate: float = 0.1
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 200
    batch_size: int = 128
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", OptimizerKind(self.kind))
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")

    def replace(self, **changes) -> OptimizerConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass
class TrainResult:
    model: LinearModel
    loss_history: np.ndarray = field(repr=False)


def fit(dataset: LabeledDataset, spec: MarginSpec, opt: OptimizerConfig,
        init: LinearModel | None = None) -> TrainResult:
    """Minimise the mean margin loss from zero (or ``init``) parameters.

    Data are reshuffled each epoch from a generator seeded by ``opt.seed``;
    identical inputs give bit-identical models.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    L = spec.num_classes
    if dataset.num_classes > L or dataset.labels.max() >= L:
        raise ValueError("dataset labels exceed the number of classes in the loss")
    X = np.ascontiguousarray(dataset.features)
    y = np.ascontiguousarray(dataset.labels)
    D = X.shape[1]
    theta = (init.flat() if init is not None else np.zeros(L * (D + 1))).astype(np.float64)
    state1 = np.zeros_like(theta)
    state2 = np.zeros_like(theta)
    kind = _kernels.SGD_MOMENTUM if opt.kind is OptimizerKind.SGD_MOMENTUM else _kernels.ADAM
    delta = np.ascontiguousarray(spec.delta)
    alpha = np.ascontiguousarray(spec.alpha)
    rng = make_rng(opt.seed)
    history = np.empty(opt.epochs)
    step = 0
    for epoch in range(opt.epochs):
        order = rng.permutation(len(y))
        mean_loss, step = _kernels.run_epoch(
            theta, X, y, order, L, delta, alpha, opt.batch_size, kind,
            opt.learning_rate, opt.momentum, opt.beta1, opt.beta2, opt.eps,
            opt.weight_decay, state1, state2, step,
        )
        if not (np.isfinite(mean_loss) and np.all(np.isfinite(theta))):
            raise TrainingDiverged(
                f"non-finite loss or parameters at epoch {epoch} (loss={mean_loss}); "
                f"learning rate {opt.learning_rate} is likely too high"
            )
        history[epoch] = mean_loss
    return TrainResult(LinearModel.from_flat(theta, L, D), history)


def train(dataset: LabeledDataset, spec: MarginSpec, opt: OptimizerConfig) -> LinearModel:
    return fit(dataset, spec, opt).model


def batch_gradient(model: LinearModel, dataset: LabeledDataset, spec: MarginSpec) -> np.ndarray:
    """Mean loss gradient over the whole dataset as the trainer computes it (flat layout)."""
    theta = model.flat()
    grad = np.zeros_like(theta)
    order = np.arange(len(dataset))
    _kernels.accumulate_batch(
        theta, np.ascontiguousarray(dataset.features), np.ascontiguousarray(dataset.labels),
        order, 0, order.size, spec.num_classes, np.ascontiguousarray(spec.delta),
        np.ascontiguousarray(spec.alpha), grad, np.empty(spec.num_classes),
    )
    return grad / order.size


def empirical_risk(model: LinearModel, dataset: LabeledDataset, spec: MarginSpec) -> float:
    return float(margin_losses(spec, dataset.labels, forward(model, dataset.features)).mean())


def weight_norms(model: LinearModel) -> np.ndarray:
    return np.linalg.norm(model.weights, axis=1)


def pearson_correlation(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two vectors of equal length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    sa = np.sqrt(np.dot(da, da))
    sb = np.sqrt(np.dot(db, db))
    if sa == 0 or sb == 0:
        raise ValueError("correlation undefined for a constant vector")
    return float(np.clip(np.dot(da, db) / (sa * sb), -1.0, 1.0))
