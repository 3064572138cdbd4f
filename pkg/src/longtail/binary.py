"""Binary weighted, variable-margin logistic losses.

For weights ``omega_plus, omega_minus``, margins ``delta_plus, delta_minus``
and temperature ``gamma``:

    loss(+1, f) = omega_plus / gamma * log(1 + exp(gamma * (delta_plus - f)))
    loss(-1, f) = omega_minus / gamma * log(1 + exp(gamma * (delta_minus + f)))

As ``gamma`` grows these approach weighted hinge losses with margins
``delta``. Each member is proper composite; :func:`link_forward` and
:func:`link_inverse` are its link and inverse link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import expit, log_expit

from longtail.loss import MarginSpec

RISK_GRID_STEP = 1e-4


@dataclass(frozen=True)
class BinaryMarginParams:
    omega_plus: float = 1.0
    omega_minus: float = 1.0
    delta_plus: float = 0.0
    delta_minus: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("omega_plus", "omega_minus", "delta_plus", "delta_minus", "gamma"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if self.omega_plus <= 0 or self.omega_minus <= 0 or self.gamma <= 0:
            raise ValueError("weights and temperature must be strictly positive")

    @classmethod
    def standard(cls, gamma: float = 1.0) -> BinaryMarginParams:
        return cls(gamma=gamma)

    @classmethod
    def balanced(cls, pi: float, gamma: float = 1.0) -> BinaryMarginParams:
        """Inverse-prior weights with unit margins (consistent for every gamma)."""
        return cls(1.0 / pi, 1.0 / (1.0 - pi), 1.0, 1.0, gamma)

    @classmethod
    def unequal_margin(cls, pi: float, gamma: float = 1.0) -> BinaryMarginParams:
        """Unit weights, margins ``+-log((1 - pi) / pi) / gamma`` (consistent for every gamma)."""
        shift = math.log((1.0 - pi) / pi) / gamma
        return cls(1.0, 1.0, shift, -shift, gamma)

    @classmethod
    def balanced_margin(cls, pi: float, gamma: float = 1.0) -> BinaryMarginParams:
        """Inverse-prior weights with margins ``1`` and ``pi / (1 - pi)``; consistent only as gamma grows."""
        return cls(1.0 / pi, 1.0 / (1.0 - pi), 1.0, pi / (1.0 - pi), gamma)


def binary_loss(params: BinaryMarginParams, y: int, f):
    f = np.asarray(f, dtype=np.float64)
    g = params.gamma
    if y == 1:
        out = params.omega_plus / g * np.logaddexp(0.0, g * (params.delta_plus - f))
    elif y == -1:
        out = params.omega_minus / g * np.logaddexp(0.0, g * (params.delta_minus + f))
    else:
        raise ValueError("binary labels are +1 or -1")
    return float(out) if out.ndim == 0 else out


def hinge_loss(params: BinaryMarginParams, y: int, f):
    """The ``gamma -> infinity`` limit of :func:`binary_loss`."""
    f = np.asarray(f, dtype=np.float64)
    if y == 1:
        out = params.omega_plus * np.maximum(params.delta_plus - f, 0.0)
    elif y == -1:
        out = params.omega_minus * np.maximum(params.delta_minus + f, 0.0)
    else:
        raise ValueError("binary labels are +1 or -1")
    return float(out) if out.ndim == 0 else out


def binary_loss_derivative(params: BinaryMarginParams, y: int, f):
    f = np.asarray(f, dtype=np.float64)
    g = params.gamma
    if y == 1:
        out = -params.omega_plus * expit(g * (params.delta_plus - f))
    elif y == -1:
        out = params.omega_minus * expit(g * (params.delta_minus + f))
    else:
        raise ValueError("binary labels are +1 or -1")
    return float(out) if out.ndim == 0 else out


def consistency_residual(params: BinaryMarginParams, pi: float) -> float:
    """Zero exactly when the loss is Fisher consistent for the balanced error at prior ``pi``.

    ``sigma`` below is the increasing logistic function; the condition is
    ``-loss'(+1, 0) / loss'(-1, 0) == (1 - pi) / pi``.
    """
    if not 0 < pi < 1:
        raise ValueError("pi must lie in (0, 1)")
    g = params.gamma
    ratio = (params.omega_plus / params.omega_minus) * (
        expit(g * params.delta_plus) / expit(g * params.delta_minus)
    )
    return float(ratio - (1.0 - pi) / pi)


def link_inverse(params: BinaryMarginParams, f):
    """Class probability implied by score ``f``: ``1 / (1 - loss'(+1, f) / loss'(-1, f))``."""
    f = np.asarray(f, dtype=np.float64)
    g = params.gamma
    # log of -loss'(+1, f) / loss'(-1, f), kept in log space for large |f|
    log_ratio = (
        math.log(params.omega_plus / params.omega_minus)
        + log_expit(g * (params.delta_plus - f))
        - log_expit(g * (params.delta_minus + f))
    )
    out = expit(-log_ratio)
    return float(out) if out.ndim == 0 else out


def link_forward(params: BinaryMarginParams, p):
    """Link ``Psi(p)``: the score minimising the conditional risk at ``Pr(y=+1|x) = p``.

    Solves ``g**2 + (c - a*b/q) * g - a/q = 0`` for ``g = exp(gamma * f)``,
    taking the positive root, with ``q = (1 - p) / p``.
    """
    p = np.asarray(p, dtype=np.float64)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("p must lie strictly inside (0, 1)")
    gm = params.gamma
    a = (params.omega_plus / params.omega_minus) * math.exp(gm * (params.delta_plus - params.delta_minus))
    b = math.exp(gm * params.delta_minus)
    c = math.exp(gm * params.delta_plus)
    q = (1.0 - p) / p
    B = a * b / q - c
    C = a / q
    root = np.sqrt(B * B + 4.0 * C)
    # the two algebraically equal forms avoid cancellation on either sign of B
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(B >= 0, 0.5 * (B + root), 2.0 * C / (root - B))
    out = np.log(g) / gm
    return float(out) if out.ndim == 0 else out


def _unnormalised_risk(params: BinaryMarginParams, p):
    f = link_forward(params, p)
    return p * binary_loss(params, 1, f) + (1.0 - p) * binary_loss(params, -1, f)


@lru_cache(maxsize=256)
def bayes_risk_maximum(params: BinaryMarginParams) -> float:
    grid = np.arange(1, int(round(1 / RISK_GRID_STEP))) * RISK_GRID_STEP
    return float(np.max(_unnormalised_risk(params, grid)))


def conditional_bayes_risk(params: BinaryMarginParams, p, normalized: bool = False):
    """Minimal conditional risk ``p * loss(+1, Psi(p)) + (1 - p) * loss(-1, Psi(p))``.

    With ``normalized`` the curve is divided by its maximum over a grid of
    step ``RISK_GRID_STEP`` on (0, 1).
    """
    p = np.asarray(p, dtype=np.float64)
    risk = _unnormalised_risk(params, p)
    if normalized:
        risk = risk / bayes_risk_maximum(params)
    return float(risk) if np.ndim(risk) == 0 else risk


class CSSVMCheck(NamedTuple):
    consistent: bool
    normalized: bool


def cs_svm_check(omega_plus: float, omega_minus: float, delta_plus: float, delta_minus: float,
                 cost: float, tol: float = 1e-10) -> CSSVMCheck:
    """Consistency and normalisation conditions of a weighted variable-margin hinge loss at cost ``c``."""
    if omega_plus <= 0 or omega_minus <= 0:
        raise ValueError("weights must be positive")
    if not 0 < cost < 1:
        raise ValueError("cost must lie in (0, 1)")
    consistent = abs(omega_plus / omega_minus - (1.0 - cost) / cost) <= tol
    normalized = abs(delta_minus + delta_plus - 1.0 / (cost * omega_plus)) <= tol
    return CSSVMCheck(bool(consistent), bool(normalized))


def params_from_margin_spec(spec: MarginSpec, score_scale: float = 2.0) -> BinaryMarginParams:
    """Binary parameters equivalent to a two-class margin loss.

    The scalar score is ``f = (f_0 - f_1) / score_scale`` with class 0 as the
    positive label. The default scale 2 makes ``f`` the positive score under
    the sum-zero constraint ``f_0 + f_1 = 0``; the matching temperature is
    ``gamma = score_scale``.
    """
    if spec.num_classes != 2:
        raise ValueError("only two-class losses have a binary form")
    s = float(score_scale)
    return BinaryMarginParams(
        omega_plus=spec.alpha[0] * s,
        omega_minus=spec.alpha[1] * s,
        delta_plus=spec.delta[0, 1] / s,
        delta_minus=spec.delta[1, 0] / s,
        gamma=s,
    )


def binary_score(logits, score_scale: float = 2.0):
    logits = np.asarray(logits, dtype=np.float64)
    return (logits[..., 0] - logits[..., 1]) / score_scale


NAMED_CURVES = {
    "standard": lambda pi, gamma: BinaryMarginParams.standard(gamma),
    "balanced": BinaryMarginParams.balanced,
    "unequal_margin": BinaryMarginParams.unequal_margin,
    "balanced_margin": BinaryMarginParams.balanced_margin,
}


def curve_table(params: BinaryMarginParams, p_grid, f_grid) -> dict[str, np.ndarray]:
    """Columns behind the link, inverse-link and Bayes-risk plots."""
    p_grid = np.asarray(p_grid, dtype=np.float64)
    f_grid = np.asarray(f_grid, dtype=np.float64)
    return {
        "p": p_grid,
        "psi": link_forward(params, p_grid),
        "f": f_grid,
        "psi_inv": link_inverse(params, f_grid),
        "bayes_risk": conditional_bayes_risk(params, p_grid, normalized=True),
    }
