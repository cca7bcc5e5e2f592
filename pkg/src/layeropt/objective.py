"""Regularized MSE objective, full and per-block gradients, minibatch components.

Objective: f(w) = (1/P) sum_p ||yhat_p - y_p||^2 + rho * ||w||^2.

The minibatch component for an index set B carries the 1/P factor inside its
loss sum plus its share of the regularizer,

    f_B(w) = (1/P) sum_{p in B} ||yhat_p - y_p||^2 + |B| * (rho/P) * ||w||^2,

so that the components of any partition sum exactly to f.
"""

import math
from dataclasses import dataclass

import numpy as np

from .network import (ForwardCache, NetworkWeights, forward,
                      hidden_activation_prime)


@dataclass(frozen=True)
class ObjectiveConfig:
    rho: float
    sample_count: int

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")


def default_rho(num_variables: int) -> float:
    """Benchmark default regularization weight, 1e-3 / n."""
    return 1e-3 / num_variables


def weights_squared_norm(weights: NetworkWeights) -> float:
    return sum(float(np.dot(b.ravel(), b.ravel()))
               for b in (weights.block(l) for l in range(1, weights.num_layers + 1)))


def objective_value(weights: NetworkWeights, X, Y, cfg: ObjectiveConfig):
    """Returns (regularized objective, unregularized mean squared error)."""
    outputs, _ = forward(weights, X)
    resid = outputs - Y
    mse = float(np.dot(resid.ravel(), resid.ravel())) / cfg.sample_count
    return mse + cfg.rho * weights_squared_norm(weights), mse


def mse_value(weights: NetworkWeights, X, Y) -> float:
    """Unregularized MSE, used as the test-error metric."""
    outputs, _ = forward(weights, X)
    resid = outputs - Y
    return float(np.dot(resid.ravel(), resid.ravel())) / X.shape[0]


def backprop_deltas(weights: NetworkWeights, cache: ForwardCache, Y, down_to: int):
    """Propagate the error backward from the output layer down to `down_to`.

    Returns {l: delta_l} for l in down_to..L only; layers below down_to are
    never touched, which is what makes per-block gradients cheaper than the
    full gradient.
    """
    L = weights.num_layers
    gprime = hidden_activation_prime(weights.arch)
    deltas = {}
    delta = cache.z[L] - Y  # linear output layer: g'(a_L) = 1
    deltas[L] = delta
    for l in range(L - 1, down_to - 1, -1):
        delta = (delta @ weights.block(l + 1).T) * gprime(cache.a[l])
        deltas[l] = delta
    return deltas


def _block_grad_from_delta(weights, cache, delta, l, scale, reg_coeff):
    return scale * (cache.z[l - 1].T @ delta) + reg_coeff * weights.block(l)


def block_gradient(weights: NetworkWeights, Y, cfg: ObjectiveConfig, l: int,
                   cache: ForwardCache) -> np.ndarray:
    """Gradient of the objective w.r.t. weight block l only.

    The cache must be current for the weights; deltas are computed from the
    output layer down to l and no further.
    """
    if cache.versions != weights.versions():
        from .network import StaleCacheError
        raise StaleCacheError("cache does not match current weights")
    deltas = backprop_deltas(weights, cache, Y, l)
    return _block_grad_from_delta(weights, cache, deltas[l], l,
                                  2.0 / cfg.sample_count, 2.0 * cfg.rho)


def full_gradient(weights: NetworkWeights, X, Y, cfg: ObjectiveConfig):
    """Per-block gradients of the objective, as a list indexed l-1."""
    _, cache = forward(weights, X)
    deltas = backprop_deltas(weights, cache, Y, 1)
    scale = 2.0 / cfg.sample_count
    reg = 2.0 * cfg.rho
    return [_block_grad_from_delta(weights, cache, deltas[l], l, scale, reg)
            for l in range(1, weights.num_layers + 1)]


def gradient_norm(grads) -> float:
    return math.sqrt(sum(float(np.dot(g.ravel(), g.ravel())) for g in grads))


def minibatch_value(weights: NetworkWeights, cache: ForwardCache, Yb,
                    cfg: ObjectiveConfig) -> float:
    """Component objective f_B evaluated from a cache over the minibatch rows."""
    resid = cache.outputs - Yb
    loss = float(np.dot(resid.ravel(), resid.ravel())) / cfg.sample_count
    share = Yb.shape[0] * cfg.rho / cfg.sample_count
    return loss + share * weights_squared_norm(weights)


def minibatch_block_gradient(weights: NetworkWeights, cache: ForwardCache, Yb,
                             cfg: ObjectiveConfig, l: int) -> np.ndarray:
    """Gradient of f_B w.r.t. block l, from a cache over the minibatch rows."""
    deltas = backprop_deltas(weights, cache, Yb, l)
    reg = 2.0 * Yb.shape[0] * cfg.rho / cfg.sample_count
    return _block_grad_from_delta(weights, cache, deltas[l], l,
                                  2.0 / cfg.sample_count, reg)


def minibatch_value_and_block_gradient(weights: NetworkWeights, batch, X, Y,
                                       cfg: ObjectiveConfig, l: int,
                                       cache: ForwardCache = None):
    """(f_B, grad of f_B w.r.t. block l) for the sample index set `batch`.

    A cache over the batch rows may be supplied; otherwise one forward pass
    over the batch is performed.
    """
    batch = np.asarray(batch, dtype=np.intp)
    if batch.size == 0:
        raise ValueError("minibatch index set must be nonempty")
    Yb = Y[batch]
    if cache is None:
        _, cache = forward(weights, X[batch])
    return (minibatch_value(weights, cache, Yb, cfg),
            minibatch_block_gradient(weights, cache, Yb, cfg, l))


def minibatch_all_gradients(weights: NetworkWeights, cache: ForwardCache, Yb,
                            cfg: ObjectiveConfig):
    """All block gradients of f_B from one backward sweep (used by the IG baseline)."""
    deltas = backprop_deltas(weights, cache, Yb, 1)
    reg = 2.0 * Yb.shape[0] * cfg.rho / cfg.sample_count
    return [_block_grad_from_delta(weights, cache, deltas[l], l,
                                   2.0 / cfg.sample_count, reg)
            for l in range(1, weights.num_layers + 1)]
