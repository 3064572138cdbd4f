"""Pairwise margin softmax losses.

Every loss here is a member of one family: for label weights ``alpha`` and
a margin matrix ``delta``,

    loss(y, f) = alpha[y] * log(1 + sum_{y' != y} exp(delta[y, y'] + f[y'] - f[y]))

Standard cross-entropy, the balanced loss, the adaptive and equalised
margin losses and the logit adjusted loss differ only in how ``alpha`` and
``delta`` are built from the class priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from longtail.dist import ClassPriors


def _as_priors(priors) -> np.ndarray:
    if isinstance(priors, ClassPriors):
        return priors.probs
    return ClassPriors(priors).probs


@dataclass(frozen=True)
class MarginSpec:
    """Label weights and pairwise margins; the diagonal of ``delta`` is zeroed."""

    alpha: np.ndarray
    delta: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=np.float64)
        delta = np.array(self.delta, dtype=np.float64)
        L = alpha.size
        if alpha.ndim != 1 or delta.shape != (L, L):
            raise ValueError(f"alpha must be length L and delta L x L, got {alpha.shape}, {delta.shape}")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise ValueError("label weights must be strictly positive and finite")
        if not np.all(np.isfinite(delta)):
            raise ValueError("margins must be finite")
        np.fill_diagonal(delta, 0.0)
        alpha.setflags(write=False)
        delta.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta", delta)

    @property
    def num_classes(self) -> int:
        return self.alpha.size

    def to_dict(self) -> dict:
        return {"name": self.name, "alpha": self.alpha.tolist(), "delta": self.delta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> MarginSpec:
        return cls(np.asarray(d["alpha"]), np.asarray(d["delta"]), d.get("name", "custom"))


def _check_labels(spec: MarginSpec, labels: np.ndarray):
    if labels.size and (labels.min() < 0 or labels.max() >= spec.num_classes):
        raise ValueError("label out of range")


def margin_losses(spec: MarginSpec, labels, scores) -> np.ndarray:
    """Per-example losses for an ``N x L`` score matrix."""
    labels = np.asarray(labels, dtype=np.int64)
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    _check_labels(spec, labels)
    rows = np.arange(labels.size)
    # z[n, y'] = delta[y, y'] + f[y'] - f[y]; z[n, y] = 0 carries the "1 +" term
    z = spec.delta[labels] + scores - scores[rows, labels][:, None]
    m = z.max(axis=1, keepdims=True)  # >= 0 since z[n, y] = 0
    lse = m[:, 0] + np.log(np.exp(z - m).sum(axis=1))
    return spec.alpha[labels] * lse


def margin_loss_grads(spec: MarginSpec, labels, scores) -> np.ndarray:
    """Per-example gradients with respect to the scores, ``N x L``."""
    labels = np.asarray(labels, dtype=np.int64)
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    _check_labels(spec, labels)
    z = scores + spec.delta[labels]
    z = z - z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    p[np.arange(labels.size), labels] -= 1.0
    return spec.alpha[labels][:, None] * p


def loss_value(spec: MarginSpec, y: int, logits) -> float:
    return float(margin_losses(spec, [y], np.asarray(logits)[None, :])[0])


def loss_grad(spec: MarginSpec, y: int, logits) -> np.ndarray:
    return margin_loss_grads(spec, [y], np.asarray(logits)[None, :])[0]


def spec_erm(num_classes: int) -> MarginSpec:
    L = num_classes
    return MarginSpec(np.ones(L), np.zeros((L, L)), "erm")


def spec_balanced(priors) -> MarginSpec:
    pi = _as_priors(priors)
    return MarginSpec(1.0 / pi, np.zeros((pi.size, pi.size)), "balanced")


def spec_adaptive(priors, scale: float = 1.0) -> MarginSpec:
    """Margin ``scale * pi[y]**-1/4`` that depends only on the positive label."""
    pi = _as_priors(priors)
    delta = np.repeat(scale * pi[:, None] ** -0.25, pi.size, axis=1)
    return MarginSpec(np.ones(pi.size), delta, "adaptive")


def spec_equalised(priors, tau: float = 1.0) -> MarginSpec:
    """Margin ``log F(pi[y'])`` with ``F(z) = z**tau``, a function of the negative only."""
    pi = _as_priors(priors)
    delta = np.repeat(tau * np.log(pi)[None, :], pi.size, axis=0)
    return MarginSpec(np.ones(pi.size), delta, "equalised")


def spec_logit_adjusted(priors, tau: float = 1.0) -> MarginSpec:
    pi = _as_priors(priors)
    logp = np.log(pi)
    return MarginSpec(np.ones(pi.size), tau * (logp[None, :] - logp[:, None]), "logit_adjusted")


def spec_from_delta(priors, delta) -> MarginSpec:
    """Weights ``delta/pi`` and margins ``log(delta[y']/delta[y])``.

    Fisher consistent for the balanced error for every positive ``delta``.
    """
    pi = _as_priors(priors)
    d = np.asarray(delta, dtype=np.float64)
    if d.shape != pi.shape or np.any(d <= 0):
        raise ValueError("delta must be a positive vector with one entry per class")
    logd = np.log(d)
    return MarginSpec(d / pi, logd[None, :] - logd[:, None], "from_delta")


def spec_combined(priors, tau: float = 1.0, scale: float = 1.0) -> MarginSpec:
    """Logit adjusted margins plus the adaptive ``pi[y]**-1/4`` margin."""
    la = spec_logit_adjusted(priors, tau)
    ad = spec_adaptive(priors, scale)
    return MarginSpec(np.ones(la.num_classes), la.delta + ad.delta, "combined")


def spec_interpolated(priors, tau1: float, tau2: float) -> MarginSpec:
    """Margins ``tau2 * log pi[y'] - tau1 * log pi[y]``.

    ``tau1 == tau2 == tau`` gives the logit adjusted loss at ``tau``;
    ``tau1 == 0`` gives the equalised loss at ``tau2``.
    """
    pi = _as_priors(priors)
    logp = np.log(pi)
    delta = tau2 * logp[None, :] - tau1 * logp[:, None]
    return MarginSpec(np.ones(pi.size), delta, "interpolated")


SPEC_BUILDERS = {
    "erm": lambda priors, tau=1.0: spec_erm(len(_as_priors(priors))),
    "balanced": lambda priors, tau=1.0: spec_balanced(priors),
    "adaptive": lambda priors, tau=1.0: spec_adaptive(priors),
    "equalised": spec_equalised,
    "logit_adjusted": spec_logit_adjusted,
    "combined": spec_combined,
}


def build_spec(name: str, priors, tau: float = 1.0) -> MarginSpec:
    """Look up a named loss by the identifiers used in experiment configs."""
    try:
        builder = SPEC_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; choose from {sorted(SPEC_BUILDERS)}") from None
    return builder(priors, tau=tau)
