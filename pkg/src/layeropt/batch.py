"""Batch layer-block descent drivers.

Each outer cycle visits every weight block once (forward, backward, or
seeded-random order). A visited block is updated by an inner L-BFGS solve on
that block alone, accepted only if the trial point is (1) no worse than the
point reached by an Armijo step along the block steepest-descent direction and
(2) achieves sufficient decrease measured by the quadratic forcing term
sigma0 * ||displacement||^2; otherwise the Armijo point itself is committed.
The inner gradient tolerance tightens by a fixed factor after every cycle.

A full-variable L-BFGS driver with the same stopping criteria serves as the
non-decomposed baseline.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import SeededRng, frobenius_norm
from .network import (Activation, NetworkWeights, forward, forward_partial,
                      hidden_activation_prime, sigmoid)
from .objective import (ObjectiveConfig, block_gradient, full_gradient,
                        gradient_norm, weights_squared_norm)
from .solvers import (ArmijoParams, LbfgsParams, LinesearchError,
                      armijo_linesearch, lbfgs_minimize, lbfgs_minimize_block)


class BlockSelectionRule:
    """Cyclic block orderings: forward (1..L), backward (L..1), or a fresh
    seeded permutation per cycle."""

    FORWARD = "forward"
    BACKWARD = "backward"
    RANDOM = "random"

    def __init__(self, kind: str, seed: int = 0):
        if kind not in (self.FORWARD, self.BACKWARD, self.RANDOM):
            raise ValueError(f"unknown selection rule {kind!r}")
        self.kind = kind
        self.seed = seed

    def cycle(self, num_layers: int, cycle_index: int):
        """Block visit order for one cycle; every block appears exactly once."""
        if self.kind == self.FORWARD:
            return list(range(1, num_layers + 1))
        if self.kind == self.BACKWARD:
            return list(range(num_layers, 0, -1))
        rng = SeededRng(self.seed).child(cycle_index)
        return [int(i) + 1 for i in rng.permutation(num_layers)]


class BlockCycler:
    """Stateful one-at-a-time view of a selection rule."""

    def __init__(self, rule: BlockSelectionRule, num_layers: int):
        self.rule = rule
        self.num_layers = num_layers
        self._cycle_index = 0
        self._queue = []

    def next_block(self) -> int:
        if not self._queue:
            self._queue = self.rule.cycle(self.num_layers, self._cycle_index)
            self._cycle_index += 1
        return self._queue.pop(0)


@dataclass(frozen=True)
class AcceptanceParams:
    armijo: ArmijoParams = field(default_factory=ArmijoParams)
    sigma0: float = None  # forcing coefficient; defaults to gamma/a

    def __post_init__(self):
        if self.sigma0 is None:
            object.__setattr__(self, "sigma0", self.armijo.gamma / self.armijo.a)
        if self.sigma0 > self.armijo.gamma / self.armijo.a + 1e-15:
            raise ValueError("sigma0 must not exceed gamma/a, or the Armijo "
                             "fallback point could fail the decrease condition")


def accept_trial(f_current: float, f_trial: float, f_armijo_point: float,
                 displacement_norm: float, params: AcceptanceParams) -> bool:
    """True iff the trial passes both acceptance conditions: no worse than the
    Armijo steepest-descent point, and decrease >= sigma0 * displacement^2."""
    cond1 = f_trial <= f_armijo_point
    cond2 = f_trial - f_current <= -params.sigma0 * displacement_norm ** 2
    return cond1 and cond2


@dataclass(frozen=True)
class StoppingCriteria:
    grad_norm_tol: float = 1e-3
    f_tol: float = 1e-4
    time_limit_seconds: float = 150.0
    check_cadence: int = 30
    # Hardware-neutral caps used instead of wall clock in deterministic runs.
    max_cycles: int = None
    max_epochs: int = None
    max_inner_iters: int = None


@dataclass
class OptimizerRun:
    """One seeded optimization trajectory and its summary statistics."""

    algorithm: str
    seed: int
    final_weights: NetworkWeights
    trajectory: list
    final_objective: float
    final_grad_norm: float
    elapsed_seconds: float
    layer_update_counts: list
    stop_reason: str
    inner_iterations: int = 0


def _value_from_outputs(outputs, Y, cfg, sq_norm):
    resid = outputs - Y
    return float(np.dot(resid.ravel(), resid.ravel())) / cfg.sample_count \
        + cfg.rho * sq_norm


def _block_eval(weights, cache, Y, cfg, l, base_sq, gprime):
    """Closures evaluating f and (f, grad) as functions of block l alone,
    propagating only layers >= l from the cached prefix. No shared state is
    mutated, so these are safe inside linesearches."""
    L = weights.num_layers
    z_prev = cache.z[l - 1]
    old_sq = float(np.dot(weights.block(l).ravel(), weights.block(l).ravel()))
    _sig = sigmoid if weights.arch.activation is Activation.SIGMOID else (lambda x: x)

    def value(Wl):
        sq = base_sq - old_sq + float(np.dot(Wl.ravel(), Wl.ravel()))
        a = z_prev @ Wl
        z = a if l == L else _sig(a)
        for j in range(l + 1, L + 1):
            a = z @ weights.block(j)
            z = a if j == L else _sig(a)
        return _value_from_outputs(z, Y, cfg, sq)

    def value_and_grad(Wl):
        sq = base_sq - old_sq + float(np.dot(Wl.ravel(), Wl.ravel()))
        a_list = {}
        a = z_prev @ Wl
        a_list[l] = a
        z = a if l == L else _sig(a)
        for j in range(l + 1, L + 1):
            a = z @ weights.block(j)
            a_list[j] = a
            z = a if j == L else _sig(a)
        f = _value_from_outputs(z, Y, cfg, sq)
        delta = z - Y
        for j in range(L - 1, l - 1, -1):
            delta = (delta @ weights.block(j + 1).T) * gprime(a_list[j])
        grad = (2.0 / cfg.sample_count) * (z_prev.T @ delta) + 2.0 * cfg.rho * Wl
        return f, grad

    return value, value_and_grad


def b2ld_run(weights0: NetworkWeights, X, Y, cfg: ObjectiveConfig,
             rule: BlockSelectionRule, acceptance: AcceptanceParams,
             lbfgs: LbfgsParams, stop: StoppingCriteria,
             seed: int = 0) -> OptimizerRun:
    """Cyclic block-layer descent with inner L-BFGS solves of increasing accuracy."""
    weights = weights0.copy()
    L = weights.num_layers
    start = time.monotonic()
    deadline = None if stop.time_limit_seconds is None \
        else start + stop.time_limit_seconds

    _, cache = forward(weights, X)
    sq = weights_squared_norm(weights)
    f_cur = _value_from_outputs(cache.outputs, Y, cfg, sq)
    traj = [f_cur]
    counts = [0] * L
    last_rel_dec = [math.inf] * L
    eps = lbfgs.grad_tol
    inner_total = 0
    gprime = hidden_activation_prime(weights.arch)
    reason = None
    cycle = 0

    while reason is None:
        gnorm = gradient_norm(full_gradient(weights, X, Y, cfg))
        if gnorm <= stop.grad_norm_tol:
            reason = "grad_norm"
            break
        if stop.max_cycles is not None and cycle >= stop.max_cycles:
            reason = "max_cycles"
            break
        if deadline is not None and time.monotonic() > deadline:
            reason = "time_limit"
            break

        any_update = False
        for l in rule.cycle(L, cycle):
            g_l = block_gradient(weights, Y, cfg, l, cache)
            bnorm = frobenius_norm(g_l)
            # Skip blocks whose gradient or last relative decrease is already
            # below tolerance; skipped blocks still advance the cycle but are
            # not counted as updates.
            if bnorm <= stop.grad_norm_tol or last_rel_dec[l - 1] <= stop.f_tol:
                continue

            sq = weights_squared_norm(weights)
            value, value_and_grad = _block_eval(weights, cache, Y, cfg, l, sq, gprime)
            w_l = weights.block(l)

            # Armijo reference point along the block steepest-descent direction.
            slope = -bnorm * bnorm
            try:
                alpha = armijo_linesearch(lambda a: value(w_l - a * g_l), f_cur,
                                          slope, acceptance.armijo)
            except LinesearchError:
                continue
            w_armijo = w_l - alpha * g_l
            f_armijo = value(w_armijo)

            res = lbfgs_minimize_block(
                value_and_grad, w_l,
                replace(lbfgs, grad_tol=eps), deadline=deadline,
                check_cadence=stop.check_cadence)
            inner_total += max(res.iterations, 1)

            disp = frobenius_norm(res.x - w_l)
            if accept_trial(f_cur, res.f, f_armijo, disp, acceptance):
                chosen, f_new = res.x, res.f
            else:
                chosen, f_new = w_armijo, f_armijo

            weights.set_block(l, chosen)
            forward_partial(weights, cache, l)
            last_rel_dec[l - 1] = (f_cur - f_new) / max(f_cur, 1.0)
            f_cur = f_new
            traj.append(f_cur)
            counts[l - 1] += 1
            any_update = True

            if deadline is not None and time.monotonic() > deadline:
                reason = "time_limit"
                break
            if stop.max_inner_iters is not None and inner_total >= stop.max_inner_iters:
                reason = "iteration_budget"
                break

        if reason is None and not any_update:
            reason = "f_tol"
        eps *= lbfgs.accuracy_shrink
        cycle += 1

    gnorm = gradient_norm(full_gradient(weights, X, Y, cfg))
    return OptimizerRun(algorithm="B2LD", seed=seed, final_weights=weights,
                        trajectory=traj, final_objective=f_cur,
                        final_grad_norm=gnorm,
                        elapsed_seconds=time.monotonic() - start,
                        layer_update_counts=counts, stop_reason=reason,
                        inner_iterations=inner_total)


def lbfgs_baseline_run(weights0: NetworkWeights, X, Y, cfg: ObjectiveConfig,
                       lbfgs: LbfgsParams, stop: StoppingCriteria,
                       seed: int = 0) -> OptimizerRun:
    """Full-variable L-BFGS on the whole problem, same stopping criteria."""
    weights = weights0.copy()
    start = time.monotonic()
    deadline = None if stop.time_limit_seconds is None \
        else start + stop.time_limit_seconds

    def fg(vec):
        weights.set_from_flat(vec)
        grads = full_gradient(weights, X, Y, cfg)
        resid_f = _objective_flat(weights, X, Y, cfg)
        return resid_f, np.concatenate([g.ravel() for g in grads])

    max_iters = stop.max_inner_iters if stop.max_inner_iters is not None \
        else lbfgs.max_iters
    params = replace(lbfgs, grad_tol=stop.grad_norm_tol, max_iters=max_iters)
    res = lbfgs_minimize(fg, weights0.flatten(), params, deadline=deadline,
                         check_cadence=stop.check_cadence, f_tol=stop.f_tol)
    weights.set_from_flat(res.x)
    reason = {"grad_tol": "grad_norm", "max_iters": "iteration_budget"}.get(
        res.stop_reason, res.stop_reason)
    return OptimizerRun(algorithm="LBFGS", seed=seed, final_weights=weights,
                        trajectory=res.f_history, final_objective=res.f,
                        final_grad_norm=res.grad_norm,
                        elapsed_seconds=time.monotonic() - start,
                        layer_update_counts=[res.iterations] * weights.num_layers,
                        stop_reason=reason, inner_iterations=res.iterations)


def _objective_flat(weights, X, Y, cfg):
    outputs, _ = forward(weights, X)
    return _value_from_outputs(outputs, Y, cfg, weights_squared_norm(weights))
