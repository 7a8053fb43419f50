"""Comparator algorithms: EXTRA, catalyst-wrapped EXTRA, and GT-SAGA.

All of them are full consensus methods on the mixing matrix
W_mix = I - W/lambda_max(W) (row sums 1, symmetric, spectrum in [0, 1]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DivergenceError, ValidationError
from .recording import BASE_COLUMNS, Budget, CostModel, Trace

ACCEL_EXTRA_COLUMNS = BASE_COLUMNS + ("outer_iter", "beta", "q")


def mixing_matrix(gossip):
    W_mix = np.eye(gossip.n) - gossip.W / gossip.lambda_max
    return W_mix


def default_extra_step(problem):
    """1/(2 L_batch) with L_batch the estimated worst local smoothness."""
    return 1.0 / (2.0 * problem.batch_smoothness("estimate"))


def _check_finite(x, iteration, algorithm):
    if not np.isfinite(x).all():
        raise DivergenceError(
            f"non-finite iterate at iteration {iteration} ({algorithm})",
            iteration=iteration, update_kind=algorithm,
        )


# ---------------------------------------------------------------------------
# EXTRA
# ---------------------------------------------------------------------------

@dataclass
class ExtraState:
    """Summed-correction form: x_{t+1} = W_mix x_t - eta*grad(x_t) + e_t with
    e_{t+1} = e_t + (W_mix x_t - x_t)/2, equivalent to the classic two-matrix
    recursion; the genuine fixed point is (x = consensus optimum,
    e = eta * stacked local gradients)."""

    x: np.ndarray
    e: np.ndarray
    iteration: int = 0
    n_grads: int = 0
    n_comms: int = 0
    sim_time: float = 0.0


def extra_init(problem, x0=None):
    n, d = problem.n, problem.d
    x = np.zeros((n, d)) if x0 is None else np.array(x0, dtype=float)
    return ExtraState(x=x, e=np.zeros((n, d)))


def extra_step(state, problem, W_mix, eta_b, grad_fn=None, tau=0.0, degree=1):
    grads = grad_fn(state.x) if grad_fn is not None else problem.stacked_full_gradients(state.x)
    wx = W_mix @ state.x
    x_next = (wx - eta_b * grads) + state.e
    state.e = state.e + (wx - state.x) / 2.0
    state.x = x_next
    state.iteration += 1
    state.n_grads += problem.m
    state.n_comms += degree
    state.sim_time += problem.m + tau * degree
    _check_finite(state.x, state.iteration, "extra")


def _baseline_metrics(x, problem, reference):
    mean = x.mean(axis=0)
    gap = float(np.max(np.linalg.norm(x - mean, axis=1)))
    if reference is not None:
        theta_star, f_star = reference
        subopt = problem.objective(x[0]) - f_star
        msd = float(np.mean(np.sum((x - theta_star) ** 2, axis=1)))
    else:
        subopt, msd = float("nan"), float("nan")
    return subopt, msd, gap


def _drive_baseline(step_fn, get_x, counters, problem, budget, trace, reference,
                    cadence=1, extras=None, max_steps=None):
    extras = extras or {}
    subopt = None

    def record():
        nonlocal subopt
        s, msd, gap = _baseline_metrics(get_x(), problem, reference)
        subopt = s if reference is not None else None
        it, sim, ng, nc = counters()
        trace.append(iter=it, sim_time=sim, n_grads_per_node=ng, n_comms=nc,
                     subopt_node0=s, mean_sq_dist_to_star=msd, consensus_gap=gap,
                     **extras)

    if not trace.rows:
        record()
    done = 0
    while not budget.exhausted(counters()[0], counters()[1], subopt):
        if max_steps is not None and done >= max_steps:
            break
        step_fn()
        done += 1
        if counters()[0] % cadence == 0:
            record()
    if not trace.rows or trace.rows[-1][0] != counters()[0]:
        record()
    return subopt


def run_extra(problem, gossip, budget, eta_b=None, reference=None, cost=None,
              cadence=1, x0=None):
    """Budgeted EXTRA run; each iteration costs m gradient-units + tau."""
    if eta_b is None:
        eta_b = default_extra_step(problem)
    if eta_b <= 0:
        raise ValidationError("eta_b must be > 0")
    cost = cost or CostModel(0.0)
    if gossip is not None:
        W_mix = mixing_matrix(gossip)
    else:
        if problem.n != 1:
            raise ValidationError("a gossip matrix is required when n > 1")
        W_mix = np.eye(1)
    state = extra_init(problem, x0)
    trace = Trace(columns=BASE_COLUMNS)
    trace.metadata.update({"algorithm": "extra", "eta_b": eta_b, "tau": cost.tau})
    _drive_baseline(
        lambda: extra_step(state, problem, W_mix, eta_b, tau=cost.tau),
        lambda: state.x,
        lambda: (state.iteration, state.sim_time, state.n_grads, state.n_comms),
        problem, budget, trace, reference, cadence,
    )
    trace.metadata["final_iteration"] = state.iteration
    return trace, state


def run_extra_catalyst(problem, gossip, budget, eta_b=None, beta_rule="finite_sum",
                       beta_value=None, k_inner=1, reference=None, cost=None,
                       cadence=1, x0=None):
    """Catalyst outer loop around EXTRA inner iterations on the beta-shifted
    objective (gradient gains beta*(x - omega) per node; step uses the shifted
    smoothness). Comparator-grade implementation."""
    from .catalyst import select_beta  # local import avoids a cycle
    from .problem import shifted_problem

    beta = select_beta(problem, gossip, beta_rule, beta_value)
    shifted = shifted_problem(problem, beta)
    if eta_b is None:
        eta_b = 1.0 / (2.0 * (problem.batch_smoothness("estimate") + beta))
    cost = cost or CostModel(0.0)
    W_mix = mixing_matrix(gossip) if gossip is not None else np.eye(1)
    q = float(problem.sigma.min() / (problem.sigma.min() + beta))
    extr = (1.0 - math.sqrt(q)) / (1.0 + math.sqrt(q))

    state = extra_init(problem, x0)
    omega = state.x.copy()
    x_prev_outer = state.x.copy()
    trace = Trace(columns=ACCEL_EXTRA_COLUMNS)
    trace.metadata.update({"algorithm": "extra_catalyst", "eta_b": eta_b,
                           "beta": beta, "q": q, "tau": cost.tau})
    outer = 0
    subopt = None
    counters = lambda: (state.iteration, state.sim_time, state.n_grads, state.n_comms)
    while not budget.exhausted(state.iteration, state.sim_time, subopt):
        def grad_fn(x, omega=omega):
            return problem.stacked_full_gradients(x) + beta * (x - omega)
        subopt = _drive_baseline(
            lambda: extra_step(state, problem, W_mix, eta_b, grad_fn=grad_fn, tau=cost.tau),
            lambda: state.x, counters, problem, budget, trace, reference, cadence,
            extras={"outer_iter": outer, "beta": beta, "q": q}, max_steps=k_inner,
        )
        x_k = state.x.copy()
        omega_new = x_k + extr * (x_k - x_prev_outer)
        x_prev_outer = x_k
        omega = omega_new
        state.e = np.zeros_like(state.e)  # restart the correction for the new objective
        outer += 1
    trace.metadata["final_iteration"] = state.iteration
    trace.metadata["outer_iterations"] = outer
    return trace, state


# ---------------------------------------------------------------------------
# GT-SAGA
# ---------------------------------------------------------------------------

@dataclass
class GtSagaState:
    """Gradient-tracking SAGA: x gossips against the tracker y, y tracks the
    average of per-node SAGA estimators g for the sum-structured local loss.
    The genuine fixed point is (x = consensus optimum, y = 0, table at optimum
    gradients, g_prev = local full gradients)."""

    x: np.ndarray            # (n, d)
    y: np.ndarray            # (n, d)
    table: np.ndarray        # (n, m, d) per-sample loss gradients
    table_sum: np.ndarray    # (n, d)
    g_prev: np.ndarray       # (n, d) last SAGA estimator per node
    rng: np.random.Generator
    iteration: int = 0
    n_grads: int = 0
    n_comms: int = 0
    sim_time: float = 0.0


def default_gt_saga_step(problem):
    """Safe step for the sum-structured SAGA estimator (documented reconstruction)."""
    return 1.0 / (3.0 * (float(problem.sigma.max()) + problem.m * float(problem.L.max())))


def gt_saga_init(problem, seed=0, x0=None):
    n, d = problem.n, problem.d
    x = np.zeros((n, d)) if x0 is None else np.array(x0, dtype=float)
    table = problem.cache_gradients(np.broadcast_to(x[:, None, :], (n, problem.m, d)).copy())
    table_sum = table.sum(axis=1)
    g0 = problem.sigma[:, None] * x + table_sum
    return GtSagaState(x=x, y=g0.copy(), table=table, table_sum=table_sum,
                       g_prev=g0, rng=np.random.default_rng(seed),
                       n_grads=problem.m, sim_time=float(problem.m))


def gt_saga_step(state, problem, W_mix, eta_b, tau=0.0):
    n, m = problem.n, problem.m
    state.x = W_mix @ state.x - eta_b * state.y
    j = state.rng.integers(0, m, size=n)
    ar = np.arange(n)
    raw = problem.sampled_gradients(state.x, j)
    old = state.table[ar, j]
    g = state.x * problem.sigma[:, None] + m * (raw - old) + state.table_sum
    state.table_sum = state.table_sum + (raw - old)
    state.table[ar, j] = raw
    state.y = W_mix @ state.y + g - state.g_prev
    state.g_prev = g
    state.iteration += 1
    state.n_grads += 1
    state.n_comms += 2
    state.sim_time += 1.0 + 2.0 * tau
    _check_finite(state.x, state.iteration, "gt_saga")


def run_gt_saga(problem, gossip, budget, eta_b=None, seed=0, reference=None,
                cost=None, cadence=None, x0=None):
    """Budgeted GT-SAGA run; each iteration costs 1 gradient-unit + 2*tau."""
    if eta_b is None:
        eta_b = default_gt_saga_step(problem)
    if eta_b <= 0:
        raise ValidationError("eta_b must be > 0")
    cost = cost or CostModel(0.0)
    if gossip is not None:
        W_mix = mixing_matrix(gossip)
    else:
        if problem.n != 1:
            raise ValidationError("a gossip matrix is required when n > 1")
        W_mix = np.eye(1)
    if cadence is None:
        cadence = max(1, math.ceil((problem.m + problem.kappa_s) / 20.0))
    state = gt_saga_init(problem, seed=seed, x0=x0)
    trace = Trace(columns=BASE_COLUMNS)
    trace.metadata.update({"algorithm": "gt_saga", "eta_b": eta_b, "seed": seed,
                           "tau": cost.tau})
    _drive_baseline(
        lambda: gt_saga_step(state, problem, W_mix, eta_b, tau=cost.tau),
        lambda: state.x,
        lambda: (state.iteration, state.sim_time, state.n_grads, state.n_comms),
        problem, budget, trace, reference, cadence,
    )
    trace.metadata["final_iteration"] = state.iteration
    return trace, state
