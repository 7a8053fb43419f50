"""Proximal-point outer acceleration (inexact catalyst loop) around the core method.

Each outer iteration minimizes F_t(theta) = F(theta) + (beta/2) sum_i
||theta_i - omega_i||^2 approximately by running K inner steps of the core
method on the beta-shifted problem, then extrapolates the prox centers.
The shifted linear term is absorbed in the initialization/warm-start shifts, so
inner iterations are literally core-method iterations with sigma_i + beta.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import dvr
from .exceptions import ValidationError
from .problem import shifted_problem
from .recording import BASE_COLUMNS, CostModel, Trace

ACCEL_COLUMNS = BASE_COLUMNS + ("outer_iter", "beta", "q")


@dataclass(frozen=True)
class CatalystParams:
    beta: float
    q: float                       # sigma_min / (sigma_min + beta)
    k_inner: int
    t_outer: int
    rho_out: float
    beta_rule: str                 # batch | finite_sum | manual
    inner: dvr.DvrParams

    def __post_init__(self):
        if self.beta < 0:
            raise ValidationError("beta must be >= 0")
        if not (0.0 < self.q <= 1.0):
            raise ValidationError("q must lie in (0,1]")
        if self.k_inner < 1 or self.t_outer < 1:
            raise ValidationError("k_inner and t_outer must be >= 1")

    @property
    def extrapolation(self):
        sq = math.sqrt(self.q)
        return (1.0 - sq) / (1.0 + sq)


def select_beta(problem, gossip=None, rule="finite_sum", value=None):
    """Prox weight beta.

    finite_sum: beta = max(L_s/m - sigma_min, 0) with L_s = max_i sum_j L_ij.
    batch: bisection balancing the communication and computation conditioning
    (kappa_comm^beta = gamma*(m + kappa_s^beta), i.e. p_comm = 1/2 for the
    shifted problem).
    manual: the provided value (must be >= 0).
    """
    sigma_min = float(problem.sigma.min())
    if rule == "manual":
        if value is None or value < 0:
            raise ValidationError("manual beta requires a value >= 0")
        return float(value)
    if rule == "finite_sum":
        L_s = float(problem.L.sum(axis=1).max())
        return max(L_s / problem.m - sigma_min, 0.0)
    if rule != "batch":
        raise ValidationError(f"unknown beta rule {rule!r}")
    if problem.n == 1 or gossip is None:
        raise ValidationError("batch rule needs a communication graph")

    def balance(beta):
        shifted = shifted_problem(problem, beta)
        p = dvr.compute_params(shifted, gossip)
        return p.kappa_comm - gossip.gamma * (problem.m + shifted.kappa_s)

    # balance < 0: computation dominates and grows beta helps; balance is
    # increasing in beta (kappa_s^beta shrinks), so a unique crossing exists.
    if balance(0.0) >= 0.0:
        return 0.0  # communication already dominates; the prox shift cannot help
    lo, hi = 0.0, 1.0
    while balance(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            # the balance point does not exist (communication never becomes the
            # bottleneck); fall back to the per-pass rule
            return select_beta(problem, gossip, "finite_sum")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if balance(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def build_params(problem, gossip=None, beta_rule="finite_sum", beta_value=None,
                 k_inner=None, t_outer=None, rho_out=None, overrides=None):
    beta = select_beta(problem, gossip, beta_rule, beta_value)
    shifted = shifted_problem(problem, beta)
    inner = dvr.compute_params(shifted, gossip, overrides=overrides)
    q = float(problem.sigma.min() / (problem.sigma.min() + beta))
    if k_inner is None:
        p_comp = 1.0 - inner.p_comm
        k_inner = max(1, math.ceil(problem.m / p_comp))
    if t_outer is None:
        t_outer = 10 ** 9  # effectively budget-bound
    if rho_out is None:
        rho_out = math.sqrt(q) / 2.0
    return CatalystParams(beta=beta, q=q, k_inner=int(k_inner), t_outer=int(t_outer),
                          rho_out=float(rho_out), beta_rule=beta_rule, inner=inner)


@dataclass
class CatalystState:
    omega: np.ndarray        # (n, d) prox centers
    theta_prev: np.ndarray   # previous outer iterate (for extrapolation)
    inner: dvr.DvrState
    outer_iter: int = 0


def outer_init(problem, beta, z0=None, seed=0, track_shadow=False,
               check_invariants=False):
    """omega_0 = -(sum_j grad f_ij(z0))/(sigma_i+beta);
    theta_0 = (1 + beta/(sigma_i+beta)) * omega_0.

    The shadow accumulator starts at beta*omega_0 so that the reconstruction
    identity theta = (x_tilde - sum_j cache)/(sigma_i+beta) holds throughout."""
    shifted = shifted_problem(problem, beta)
    inner = dvr.init_state(shifted, z0=z0, seed=seed, track_shadow=track_shadow,
                           check_invariants=check_invariants)
    omega = inner.theta.copy()   # init_state already divides by sigma + beta
    if beta != 0.0:   # guard keeps beta=0 bitwise-identical to the plain method
        factor = (beta / shifted.sigma)[:, None]
        inner.theta = inner.theta + factor * omega
        if inner.x_tilde is not None:
            inner.x_tilde = inner.x_tilde + beta * omega
    return CatalystState(omega=omega, theta_prev=inner.theta.copy(), inner=inner)


def outer_step(cat, params, problem, gossip, budget, trace, cost, reference,
               cadence, record_comms=True):
    """K inner steps on the shifted problem, then extrapolate the prox centers
    and warm-start theta (z is carried forward unchanged)."""
    shifted = shifted_problem(problem, params.beta)
    extras = {"outer_iter": cat.outer_iter, "beta": params.beta, "q": params.q}
    subopt = dvr.drive(cat.inner, params.inner, shifted, gossip, budget, trace,
                       cost, reference, cadence, extras=extras,
                       max_steps=params.k_inner, record_comms=record_comms,
                       metric_problem=problem)
    theta_k = cat.inner.theta.copy()
    omega_new = theta_k + params.extrapolation * (theta_k - cat.theta_prev)
    if params.beta != 0.0:   # see outer_init: beta=0 must not perturb bit patterns
        shift = (params.beta / shifted.sigma)[:, None] * (omega_new - cat.omega)
        cat.inner.theta = theta_k + shift
        if cat.inner.x_tilde is not None:
            cat.inner.x_tilde = cat.inner.x_tilde + params.beta * (omega_new - cat.omega)
    cat.theta_prev = theta_k
    cat.omega = omega_new
    cat.outer_iter += 1
    return subopt


def epsilon_schedule(f0_gap, q, rho_out, t_outer):
    """Inner-accuracy targets eps_t = (2/9) * gap * (1 - rho_out)^t."""
    if not 0.0 < rho_out < math.sqrt(q) + 1e-15:
        raise ValidationError("rho_out must lie in (0, sqrt(q))")
    return (2.0 / 9.0) * f0_gap * (1.0 - rho_out) ** np.arange(t_outer)


def run_accelerated(problem, gossip=None, budget=None, beta_rule="finite_sum",
                    beta_value=None, k_inner=None, t_outer=None, rho_out=None,
                    seed=0, z0=None, reference=None, cost=None, cadence=None,
                    track_shadow=False, check_invariants=False, record_comms=True,
                    overrides=None):
    """Budgeted accelerated run; suboptimality is measured against the ORIGINAL
    objective. Returns (Trace, CatalystState)."""
    if budget is None:
        raise ValidationError("a budget is required")
    params = build_params(problem, gossip, beta_rule, beta_value, k_inner,
                          t_outer, rho_out, overrides=overrides)
    if cost is None:
        cost = CostModel(0.0)
    if cadence is None:
        cadence = dvr.default_cadence(problem)
    cat = outer_init(problem, params.beta, z0=z0, seed=seed,
                     track_shadow=track_shadow, check_invariants=check_invariants)
    trace = Trace(columns=ACCEL_COLUMNS)
    trace.metadata.update({
        "algorithm": "dvr_accel", "seed": seed, "tau": cost.tau,
        "beta": params.beta, "q": params.q, "k_inner": params.k_inner,
        "rho_out": params.rho_out, "beta_rule": beta_rule,
        "inner_params": json.loads(params.inner.to_json()),
    })
    subopt = None
    while cat.outer_iter < params.t_outer and \
            not budget.exhausted(cat.inner.iteration, cat.inner.sim_time, subopt):
        subopt = outer_step(cat, params, problem, gossip, budget, trace, cost,
                            reference, cadence, record_comms=record_comms)
    trace.metadata["final_iteration"] = cat.inner.iteration
    trace.metadata["outer_iterations"] = cat.outer_iter
    return trace, cat
