"""Compiled inner loops for mini-batch training.

Parameters live in one flat vector: the ``L x D`` weight matrix in row-major
order followed by the ``L`` biases. Reductions over a mini-batch run
sequentially in index order so results do not depend on BLAS threading.
"""

import math

import numpy as np
from numba import njit

SGD_MOMENTUM = 0
ADAM = 1


@njit(cache=True)
def sgd_momentum_update(param, grad, velocity, lr, momentum, weight_decay):
    for i in range(param.size):
        g = grad[i] + weight_decay * param[i]
        velocity[i] = momentum * velocity[i] + g
        param[i] -= lr * velocity[i]


@njit(cache=True)
def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps, weight_decay):
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i in range(param.size):
        g = grad[i] + weight_decay * param[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        param[i] -= lr * (m[i] / c1) / (math.sqrt(v[i] / c2) + eps)


@njit(cache=True)
def accumulate_batch(theta, X, y, order, start, stop, L, delta, alpha, grad, z):
    """Sum of losses over ``order[start:stop]``; gradient sums written to ``grad``."""
    D = X.shape[1]
    off = L * D
    grad[:] = 0.0
    total = 0.0
    for i in range(start, stop):
        n = order[i]
        yi = y[n]
        m = -np.inf
        for k in range(L):
            a = theta[off + k] + delta[yi, k]
            for d in range(D):
                a += theta[k * D + d] * X[n, d]
            z[k] = a
            if a > m:
                m = a
        s = 0.0
        for k in range(L):
            s += math.exp(z[k] - m)
        w = alpha[yi]
        total += w * (m + math.log(s) - z[yi])
        for k in range(L):
            g = math.exp(z[k] - m) / s
            if k == yi:
                g -= 1.0
            g *= w
            grad[off + k] += g
            for d in range(D):
                grad[k * D + d] += g * X[n, d]
    return total


@njit(cache=True)
def run_epoch(theta, X, y, order, L, delta, alpha, batch_size, kind, lr,
              momentum, beta1, beta2, eps, weight_decay, state1, state2, step):
    """One pass over ``order``; returns (mean loss, updated step count)."""
    N = order.size
    grad = np.zeros_like(theta)
    z = np.empty(L)
    total = 0.0
    for start in range(0, N, batch_size):
        stop = min(start + batch_size, N)
        total += accumulate_batch(theta, X, y, order, start, stop, L, delta, alpha, grad, z)
        inv = 1.0 / (stop - start)
        for i in range(grad.size):
            grad[i] *= inv
        step += 1
        if kind == SGD_MOMENTUM:
            sgd_momentum_update(theta, grad, state1, lr, momentum, weight_decay)
        else:
            adam_update(theta, grad, state1, state2, step, lr, beta1, beta2, eps, weight_decay)
    return total / N, step
