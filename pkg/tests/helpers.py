"""Shared generators and independent oracles for the test suite."""

import numpy as np

from longtail import loss


def random_priors(rng, L, floor=0.02):
    p = rng.dirichlet(np.ones(L)) + floor
    return p / p.sum()


def random_spec(rng, builder, L=None):
    L = L or int(rng.integers(2, 7))
    pi = random_priors(rng, L)
    tau = rng.uniform(0.0, 2.0)
    if builder == "erm":
        return loss.spec_erm(L)
    if builder == "balanced":
        return loss.spec_balanced(pi)
    if builder == "adaptive":
        return loss.spec_adaptive(pi)
    if builder == "equalised":
        return loss.spec_equalised(pi, tau)
    if builder == "logit_adjusted":
        return loss.spec_logit_adjusted(pi, tau)
    if builder == "from_delta":
        return loss.spec_from_delta(pi, rng.uniform(0.1, 5.0, size=L))
    if builder == "combined":
        return loss.spec_combined(pi, tau)
    if builder == "interpolated":
        return loss.spec_interpolated(pi, rng.uniform(-1, 2), rng.uniform(-1, 2))
    raise ValueError(builder)


CONSTRUCTORS = ["erm", "balanced", "adaptive", "equalised", "logit_adjusted",
                "from_delta", "combined", "interpolated"]


def central_difference(fn, x, h=1e-5):
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def naive_margin_loss(alpha, delta, y, f):
    """Direct transcription of the loss formula, no stabilisation."""
    total = 1.0
    for k in range(len(f)):
        if k != y:
            total += np.exp(delta[y][k] + f[k] - f[y])
    return alpha[y] * np.log(total)
