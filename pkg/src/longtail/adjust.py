"""Post-hoc score corrections.

Logit adjustment is additive (``f - tau * log pi``) while weight
normalisation is multiplicative (``f / nu**tau``). The two can rank labels
differently: a rare label with a negative score can never win under weight
normalisation, whatever ``tau`` is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from longtail.dist import ClassPriors
from longtail.train import LinearModel, weight_norms


@dataclass(frozen=True)
class AdjustmentParams:
    tau: float
    priors: ClassPriors

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ValueError("tau must be finite and >= 0")
        if not isinstance(self.priors, ClassPriors):
            object.__setattr__(self, "priors", ClassPriors(self.priors))


@dataclass(frozen=True)
class NormalizationSpec:
    nu: np.ndarray
    tau: float

    def __post_init__(self):
        nu = np.array(self.nu, dtype=np.float64)
        if np.any(nu <= 0) or not np.all(np.isfinite(nu)):
            raise ValueError("normalisation scales must be positive and finite")
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ValueError("tau must be finite and >= 0")
        nu.setflags(write=False)
        object.__setattr__(self, "nu", nu)


def posthoc_adjust(logits, params: AdjustmentParams) -> np.ndarray:
    """Subtract ``tau * log pi[y]`` from each score; works on one row or a batch."""
    logits = np.asarray(logits, dtype=np.float64)
    if params.tau == 0:
        return logits.copy()
    return logits - params.tau * params.priors.log()


def weight_normalize_scores(logits, spec: NormalizationSpec) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if spec.tau == 0:
        return logits.copy()
    return logits / spec.nu**spec.tau


def temperature_scale(logits, tau: float) -> np.ndarray:
    if not tau > 0:
        raise ValueError("temperature must be positive")
    return np.asarray(logits, dtype=np.float64) / tau


def predict(scores) -> np.ndarray | int:
    """Argmax label; ties go to the lowest index.

    Returns an int for a single score vector and an array for a batch.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        return int(np.argmax(scores))
    return np.argmax(scores, axis=1)


def normalize_model_weights(model: LinearModel, nu, tau: float) -> LinearModel:
    """Divide each class's weight vector and bias by ``nu[y]**tau``."""
    scale = NormalizationSpec(nu, tau).nu ** tau
    return LinearModel(model.weights / scale[:, None], model.biases / scale)


def nu_from_norms(model: LinearModel) -> np.ndarray:
    """Per-class weight 2-norms (bias excluded)."""
    return weight_norms(model)


def nu_from_priors(priors) -> np.ndarray:
    if not isinstance(priors, ClassPriors):
        priors = ClassPriors(priors)
    return priors.probs.copy()
