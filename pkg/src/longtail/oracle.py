"""Bayes-optimal references.

Two kinds of oracle live here: closed forms for the binary Gaussian task,
and a numerical population-risk minimiser over finite instance spaces. The
latter checks Fisher consistency of any margin loss directly, without
appealing to the theory that says which losses should be consistent.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from longtail.dist import NEGATIVE, POSITIVE, ClassPriors, GaussianTask, make_rng
from longtail.loss import MarginSpec


class ConvergenceError(RuntimeError):
    pass


def _std_normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def bayes_balanced_predict_gaussian(task: GaussianTask, x) -> np.ndarray | int:
    """Label with the larger class-conditional density; boundary points go to the positive class."""
    x = np.asarray(x, dtype=np.float64)
    diff = task.mean_plus - task.mean_minus
    threshold = 0.5 * (task.mean_plus @ task.mean_plus - task.mean_minus @ task.mean_minus)
    positive = x @ diff >= threshold
    out = np.where(positive, POSITIVE, NEGATIVE)
    return int(out) if out.ndim == 0 else out


def bayes_balanced_error_gaussian(task: GaussianTask) -> float:
    """Population balanced error of the midpoint hyperplane."""
    gap = float(np.linalg.norm(task.mean_plus - task.mean_minus))
    return _std_normal_cdf(-gap / (2.0 * task.sigma))


def true_eta_gaussian(task: GaussianTask, x) -> np.ndarray | float:
    """``Pr(y = +1 | x)``: a sigmoid in ``x`` with log prior odds as intercept."""
    x = np.asarray(x, dtype=np.float64)
    s2 = task.sigma**2
    w = (task.mean_plus - task.mean_minus) / s2
    offset = 0.5 * (task.mean_plus @ task.mean_plus - task.mean_minus @ task.mean_minus) / s2
    b = math.log((1.0 - task.prior_plus) / task.prior_plus)
    logit = x @ w - offset - b
    eta = 0.5 * (1.0 + np.tanh(0.5 * logit))
    return float(eta) if np.ndim(eta) == 0 else eta


@dataclass(frozen=True)
class DiscreteDistribution:
    """Joint distribution over ``m`` instances and ``L`` labels."""

    instance_probs: np.ndarray
    cond_probs: np.ndarray

    def __post_init__(self):
        px = np.array(self.instance_probs, dtype=np.float64)
        eta = np.array(self.cond_probs, dtype=np.float64)
        if px.ndim != 1 or eta.ndim != 2 or eta.shape[0] != px.size:
            raise ValueError("instance_probs must be length m and cond_probs m x L")
        if np.any(px < 0) or np.any(eta < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(px.sum() - 1.0) > 1e-12:
            raise ValueError("instance probabilities must sum to 1")
        if np.any(np.abs(eta.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("each row of cond_probs must sum to 1")
        if np.any(px @ eta <= 0):
            raise ValueError("every class must have positive probability")
        px.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "instance_probs", px)
        object.__setattr__(self, "cond_probs", eta)

    @property
    def num_instances(self) -> int:
        return self.instance_probs.size

    @property
    def num_classes(self) -> int:
        return self.cond_probs.shape[1]

    @property
    def priors(self) -> ClassPriors:
        pi = self.instance_probs @ self.cond_probs
        return ClassPriors(pi / pi.sum())

    def balanced_cond_probs(self) -> np.ndarray:
        """``Pr_bal(y | x)``, proportional to ``Pr(y | x) / Pr(y)``."""
        r = self.cond_probs / self.priors.probs
        return r / r.sum(axis=1, keepdims=True)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.instance_probs.tobytes())
        h.update(self.cond_probs.tobytes())
        return h.hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"instance_probs": self.instance_probs.tolist(), "cond_probs": self.cond_probs.tolist()}

    @classmethod
    def from_class_conditionals(cls, priors, class_conditionals) -> DiscreteDistribution:
        """Build from ``Pr(y)`` and an ``L x m`` matrix of ``Pr(x | y)``."""
        pi = np.asarray(priors, dtype=np.float64)
        pxy = np.asarray(class_conditionals, dtype=np.float64)
        joint = pi[:, None] * pxy  # L x m
        px = joint.sum(axis=0)
        eta = (joint / px).T
        eta /= eta.sum(axis=1, keepdims=True)
        return cls(px / px.sum(), eta)


def random_distribution(rng: np.random.Generator, num_instances: int, num_classes: int,
                        concentration: float = 1.0, floor: float = 1e-3) -> DiscreteDistribution:
    """Dirichlet-random joint distribution with every conditional at least ``floor``."""
    px = rng.dirichlet(np.full(num_instances, concentration))
    px = (px + floor) / (px + floor).sum()
    eta = rng.dirichlet(np.full(num_classes, concentration), size=num_instances)
    eta = (eta + floor) / (eta + floor).sum(axis=1, keepdims=True)
    return DiscreteDistribution(px, eta)


def random_skewed_binary(rng: np.random.Generator, num_instances: int,
                         prior_range=(0.01, 0.2)) -> DiscreteDistribution:
    """Binary distribution whose positive (class 0) prior lies in ``prior_range``."""
    pi_pos = rng.uniform(*prior_range)
    pxy = rng.dirichlet(np.ones(num_instances), size=2) + 1e-3
    pxy /= pxy.sum(axis=1, keepdims=True)
    return DiscreteDistribution.from_class_conditionals([pi_pos, 1.0 - pi_pos], pxy)


def conditional_risk(spec: MarginSpec, eta, f) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian in ``f`` of ``sum_y eta[y] * loss(y, f)``."""
    eta = np.asarray(eta, dtype=np.float64)
    w = eta * spec.alpha
    z = f[None, :] + spec.delta  # row y: scores shifted by that label's margins
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    s = e.sum(axis=1, keepdims=True)
    p = e / s
    lse = m[:, 0] + np.log(s[:, 0])
    value = float(w @ (lse - np.diag(z)))
    grad = w @ p - w
    hess = np.diag(w @ p) - (p * w[:, None]).T @ p
    return value, grad, hess


def minimize_conditional_risk(spec: MarginSpec, eta, tol: float = 1e-8,
                              max_iter: int = 100_000) -> np.ndarray:
    """Centred minimiser of the conditional risk at one instance.

    Damped Newton steps restricted to the sum-zero subspace with Armijo
    backtracking; the objective is convex and invariant to adding a
    constant to every score.
    """
    L = spec.num_classes
    f = np.zeros(L)
    ones = np.full((L, L), 1.0 / L)
    value, grad, hess = conditional_risk(spec, eta, f)
    for _ in range(max_iter):
        gnorm = np.linalg.norm(grad)
        if gnorm <= tol:
            return f - f.mean()
        try:
            step = -np.linalg.solve(hess + ones, grad)
        except np.linalg.LinAlgError:
            step = -grad
        step -= step.mean()
        slope = grad @ step
        if slope >= 0:
            step, slope = -grad, -(grad @ grad)
        t = 1.0
        noise = 1e-13 * max(1.0, abs(value))
        while t >= 1e-12:
            f_new = f + t * step
            v_new, g_new, h_new = conditional_risk(spec, eta, f_new)
            if v_new <= value + 1e-4 * t * slope:
                break
            # below the resolution of the objective, fall back on the gradient norm
            if abs(v_new - value) <= noise and np.linalg.norm(g_new) < gnorm:
                break
            t *= 0.5
        else:
            raise ConvergenceError(
                f"line search stalled at gradient norm {gnorm:.3e} (eta={np.asarray(eta).tolist()})"
            )
        f, value, grad, hess = f_new, v_new, g_new, h_new
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations; gradient norm {np.linalg.norm(grad):.3e}"
    )


def population_minimizer(dist: DiscreteDistribution, spec: MarginSpec, tol: float = 1e-8,
                         max_iter: int = 100_000) -> np.ndarray:
    """``m x L`` matrix of Bayes-optimal scores, each row summing to zero."""
    if spec.num_classes != dist.num_classes:
        raise ValueError("loss and distribution disagree on the number of classes")
    return np.stack([
        minimize_conditional_risk(spec, eta, tol, max_iter) for eta in dist.cond_probs
    ])


@dataclass
class ConsistencyReport:
    consistent: bool
    witnesses: list = field(default_factory=list)
    spec_name: str = ""
    dist_digest: str = ""
    target: str = "balanced"

    def to_dict(self) -> dict:
        return {
            "spec": self.spec_name,
            "distribution": self.dist_digest,
            "target": self.target,
            "consistent": self.consistent,
            "witnesses": self.witnesses,
        }


def _agrees(scores: np.ndarray, target: np.ndarray, tol: float) -> bool:
    pred = int(np.argmax(scores))
    best = int(np.argmax(target))
    if pred == best:
        return True
    # near-ties on either side count as agreement
    return scores[best] >= scores[pred] - tol or target[pred] >= target[best] - tol * abs(target[best])


def consistency_report(dist: DiscreteDistribution, spec: MarginSpec, target: str = "balanced",
                       tie_tol: float = 1e-7) -> ConsistencyReport:
    """Compare population-optimal predictions with the Bayes rule for ``target``.

    ``target="balanced"`` uses ``argmax eta[y] / pi[y]``; ``"misclassification"``
    uses ``argmax eta[y]``.
    """
    scores = population_minimizer(dist, spec)
    if target == "balanced":
        reference = dist.cond_probs / dist.priors.probs
    elif target == "misclassification":
        reference = dist.cond_probs
    else:
        raise ValueError(f"unknown target {target!r}")
    witnesses = []
    for i, (f, r) in enumerate(zip(scores, reference)):
        if not _agrees(f, r, tie_tol):
            witnesses.append({
                "instance": i,
                "predicted": int(np.argmax(f)),
                "bayes": int(np.argmax(r)),
                "scores": f.tolist(),
                "eta": dist.cond_probs[i].tolist(),
            })
    return ConsistencyReport(not witnesses, witnesses, spec.name, dist.digest(), target)


def find_inconsistency_witness(spec_factory, seed: int = 0, n_search: int = 10_000,
                               num_instances: int = 3, prior_range=(0.01, 0.2)):
    """Search random skewed binary distributions for one where ``spec_factory(priors)`` is inconsistent.

    Returns ``(distribution, report)`` or ``None`` if nothing is found.
    """
    rng = make_rng(seed)
    for _ in range(n_search):
        dist = random_skewed_binary(rng, num_instances, prior_range)
        report = consistency_report(dist, spec_factory(dist.priors))
        if not report.consistent:
            return dist, report
    return None
