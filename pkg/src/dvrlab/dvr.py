"""Decentralized variance-reduced optimization with randomized gossip/local steps.

Each node i holds a parameter row theta[i] and one auxiliary point z[i, j] per
local sample. A step is either a gossip update of theta (with probability
p_comm) or, at every node, a sampled local update that moves one z towards
theta and corrects theta by a single fresh gradient against a cached one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DivergenceError, ValidationError
from .recording import BASE_COLUMNS, Budget, CostModel, Trace

_IDENTITY_RTOL = 1e-10


@dataclass(frozen=True)
class DvrParams:
    alpha: float
    eta: float
    p_comm: float
    p_ij: np.ndarray          # (n, m), sums to 1 - p_comm per node
    kappa_comm: float
    uses_chebyshev: bool = False
    degree: int = 1
    lam_sigma: float = None   # lambda_max of the sigma^{-1}-weighted gossip operator
    # derived helper arrays (not part of the contract, precomputed for the step)
    coef_z: np.ndarray = field(default=None, repr=False, compare=False)
    cond_cum: np.ndarray = field(default=None, repr=False, compare=False)
    sigma: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        tol = 1.0 + 1e-12
        if self.alpha <= 0 or self.eta <= 0:
            raise ValidationError("alpha and eta must be > 0")
        if not (0.0 <= self.p_comm < 1.0):
            raise ValidationError(f"p_comm must lie in [0,1), got {self.p_comm}")
        psum = self.p_ij.sum(axis=1)
        if not np.allclose(psum, 1.0 - self.p_comm, rtol=1e-10, atol=1e-12):
            raise ValidationError("p_ij rows must sum to 1 - p_comm")
        ae = self.alpha * self.eta
        if self.p_comm > 0 and ae > 2.0 * self.p_comm * tol:
            raise ValidationError("alpha*eta exceeds 2*p_comm")
        if ae > 2.0 * float(self.p_ij.min()) * tol:
            raise ValidationError("alpha*eta exceeds 2*min p_ij")
        if self.p_comm > 0 and self.lam_sigma is not None \
                and self.eta > self.p_comm / self.lam_sigma * tol:
            raise ValidationError("eta exceeds the communication bound")
        c = ae / self.p_ij
        if c.max() > tol:
            raise ValidationError("alpha*eta/p_ij must lie in (0,1]")

    def to_json(self):
        return json.dumps({
            "alpha": self.alpha, "eta": self.eta, "p_comm": self.p_comm,
            "kappa_comm": self.kappa_comm, "uses_chebyshev": self.uses_chebyshev,
            "degree": self.degree, "lam_sigma": self.lam_sigma,
            "p_ij": self.p_ij.tolist(),
        }, indent=2, sort_keys=True)


def _weighted_spectrum(W, diag_weights):
    """Eigenvalues of diag(w)^{1/2} W diag(w)^{1/2} (same nonzero spectrum as the
    edge-space operator it stands for)."""
    root = np.sqrt(diag_weights)
    M = W * np.outer(root, root)
    return np.linalg.eigvalsh((M + M.T) / 2.0)


def _lambda_min_plus(eigvals):
    lam_max = eigvals[-1]
    positive = eigvals[eigvals > 1e-9 * lam_max]
    if positive.size == 0:
        raise ValidationError("weighted gossip operator has no positive eigenvalue")
    return float(positive[0])


def compute_params(problem, gossip=None, overrides=None):
    """Step-size, probabilities, and conditioning constants for a run.

    For n = 1 there is no communication: p_comm = 0, alpha is a free scale fixed
    to 1, and eta saturates the per-sample bound (alpha*eta/p_ij = 1/(1+L_ij/sigma_i)).
    """
    overrides = overrides or {}
    n, m = problem.n, problem.m
    ratio = 1.0 + problem.L / problem.sigma[:, None]   # 1 + L_ij / sigma_i
    mks = m + problem.kappa_s
    # eta's computation bound: min_ij p_ij/(alpha*(1+L_ij/sigma_i)); with the
    # proportional p_ij this is p_comp/(alpha * max_i sum_j (1+L_ij/sigma_i))
    row_ratio = float(ratio.sum(axis=1).max())

    if n == 1:
        p_comm = float(overrides.get("p_comm", 0.0))
        if p_comm != 0.0:
            raise ValidationError("p_comm must be 0 in single-node mode")
        alpha = float(overrides.get("alpha", 1.0))
        eta = float(overrides.get("eta", 1.0 / (alpha * row_ratio)))
        p_ij = ratio / ratio.sum(axis=1, keepdims=True)
        params = DvrParams(
            alpha=alpha, eta=eta, p_comm=0.0, p_ij=p_ij, kappa_comm=0.0,
            uses_chebyshev=False, degree=1, lam_sigma=None,
            coef_z=alpha * eta / p_ij,
            cond_cum=np.cumsum(p_ij, axis=1),
            sigma=problem.sigma,
        )
        return params

    if gossip is None:
        raise ValidationError("a gossip matrix is required when n > 1")
    if gossip.n != n:
        raise ValidationError("gossip matrix size does not match the problem")

    eig_sigma = _weighted_spectrum(gossip.W, 1.0 / problem.sigma)
    lam_sigma = float(eig_sigma[-1])
    eig_dm = _weighted_spectrum(gossip.W, 1.0 / problem.D_M)
    lam_dm_min = _lambda_min_plus(eig_dm)

    alpha = float(overrides.get("alpha", 2.0 * lam_dm_min))
    gamma = gossip.gamma
    kappa_comm = gamma * lam_sigma / lam_dm_min
    p_comm = float(overrides.get("p_comm", 1.0 / (1.0 + gamma * mks / kappa_comm)))
    if not (0.0 < p_comm < 1.0):
        raise ValidationError(f"p_comm must lie in (0,1), got {p_comm}")
    p_comp = 1.0 - p_comm
    p_ij = p_comp * ratio / ratio.sum(axis=1, keepdims=True)
    eta = float(overrides.get("eta", min(p_comm / lam_sigma,
                                         p_comp / (alpha * row_ratio))))

    return DvrParams(
        alpha=alpha, eta=eta, p_comm=p_comm, p_ij=p_ij, kappa_comm=kappa_comm,
        uses_chebyshev=gossip.effective_degree > 1, degree=gossip.effective_degree,
        lam_sigma=lam_sigma,
        coef_z=alpha * eta / p_ij,
        cond_cum=np.cumsum(p_ij / p_comp, axis=1),
        sigma=problem.sigma,
    )


@dataclass
class DvrState:
    theta: np.ndarray        # (n, d)
    z: np.ndarray            # (n, m, d)
    grad_cache: np.ndarray   # (n, m, d) holding grad f_ij(z[i, j])
    rng: np.random.Generator
    x_tilde: np.ndarray = None   # shadow gossip accumulator, tracked on demand
    check_invariants: bool = False
    iteration: int = 0
    n_grads: int = 0         # gradient evaluations per node
    n_comms: int = 0         # multiplications by the base gossip matrix
    sim_time: float = 0.0

    def identity_residual(self, problem):
        """Row-wise residual of theta - (x_tilde - sum_j grad_cache)/sigma."""
        if self.x_tilde is None:
            raise ValidationError("shadow tracking is not enabled for this state")
        recon = (self.x_tilde - self.grad_cache.sum(axis=1)) / problem.sigma[:, None]
        return float(np.max(np.linalg.norm(self.theta - recon, axis=1)))


def init_state(problem, z0=None, seed=0, track_shadow=False, check_invariants=False):
    """theta0 = -(sum_j grad f_ij(z0))/sigma_i per node, shadow accumulator 0.

    Filling the gradient cache costs one full local pass (m gradient
    evaluations per node), which the counters reflect.
    """
    n, m, d = problem.n, problem.m, problem.d
    if z0 is None:
        z0 = np.zeros((n, m, d))
    else:
        z0 = np.array(z0, dtype=float)
        if z0.shape != (n, m, d):
            raise ValidationError(f"z0 must have shape {(n, m, d)}")
        if not np.isfinite(z0).all():
            raise ValidationError("z0 must be finite")
    cache = problem.cache_gradients(z0)
    theta = -cache.sum(axis=1) / problem.sigma[:, None]
    state = DvrState(
        theta=theta, z=z0, grad_cache=cache, rng=np.random.default_rng(seed),
        x_tilde=np.zeros((n, d)) if (track_shadow or check_invariants) else None,
        check_invariants=check_invariants,
        n_grads=m, sim_time=float(m),
    )
    return state


@dataclass(frozen=True)
class StepOutcome:
    kind: str                 # "comm" | "comp"
    samples: np.ndarray = None  # (n,) chosen sample per node for comp steps


def step(state, params, problem, gossip=None, cost=None, forced=None):
    """Advance one iteration in place; returns the StepOutcome.

    ``forced`` replays a recorded outcome instead of drawing from the RNG
    (used by the verification engine for schedule-matched comparisons).
    """
    n = problem.n
    if forced is None:
        u = state.rng.random()
        is_comm = u < params.p_comm
    else:
        is_comm = forced.kind == "comm"

    if is_comm:
        w_theta = gossip.apply(state.theta)
        scale = params.eta / params.p_comm
        state.theta -= scale * (w_theta / params.sigma[:, None])
        if state.x_tilde is not None:
            state.x_tilde -= scale * w_theta
        state.n_comms += params.degree
        tau = cost.tau if cost is not None else 0.0
        state.sim_time += tau * params.degree
        outcome = StepOutcome(kind="comm")
    else:
        if forced is None:
            r = state.rng.random(n)
            j = np.minimum((r[:, None] > params.cond_cum).sum(axis=1), problem.m - 1)
        else:
            j = forced.samples
        ar = np.arange(n)
        c = params.coef_z[ar, j][:, None]
        z_new = (1.0 - c) * state.z[ar, j] + c * state.theta
        g_new = problem.sampled_gradients(z_new, j)
        g_old = state.grad_cache[ar, j]
        state.theta -= (g_new - g_old) / params.sigma[:, None]
        state.z[ar, j] = z_new
        state.grad_cache[ar, j] = g_new
        state.n_grads += 1
        state.sim_time += 1.0
        outcome = StepOutcome(kind="comp", samples=j)

    state.iteration += 1
    if not np.isfinite(state.theta).all():
        raise DivergenceError(
            f"non-finite parameter at iteration {state.iteration} ({outcome.kind} update)",
            iteration=state.iteration, update_kind=outcome.kind,
        )
    if state.check_invariants:
        res = state.identity_residual(problem)
        bound = _IDENTITY_RTOL * (1.0 + float(np.linalg.norm(state.theta)))
        if res > bound:
            raise DivergenceError(
                f"shadow identity violated at iteration {state.iteration}: "
                f"residual {res:.3e} > {bound:.3e}",
                iteration=state.iteration, update_kind=outcome.kind,
            )
    return outcome


def default_cadence(problem):
    return max(1, math.ceil((problem.m + problem.kappa_s) / 20.0))


def _metrics(state, problem, reference):
    theta = state.theta
    mean = theta.mean(axis=0)
    consensus_gap = float(np.max(np.linalg.norm(theta - mean, axis=1)))
    if reference is not None:
        theta_star, f_star = reference
        subopt = problem.objective(theta[0]) - f_star
        msd = float(np.mean(np.sum((theta - theta_star) ** 2, axis=1)))
    else:
        subopt, msd = float("nan"), float("nan")
    return subopt, msd, consensus_gap


def drive(state, params, problem, gossip, budget, trace, cost, reference,
          cadence, extras=None, max_steps=None, record_comms=True,
          metric_problem=None):
    """Advance ``state`` until the budget stops it (or ``max_steps`` elapse),
    appending trace rows at the cadence and after communications. Returns the
    last computed suboptimality (or None).

    ``metric_problem`` lets a wrapper step on a surrogate objective while the
    trace metrics are evaluated against the original one."""
    extras = extras or {}
    subopt = None
    if metric_problem is None:
        metric_problem = problem

    def record():
        nonlocal subopt
        s, msd, gap = _metrics(state, metric_problem, reference)
        subopt = s if reference is not None else None
        trace.append(
            iter=state.iteration, sim_time=state.sim_time,
            n_grads_per_node=state.n_grads, n_comms=state.n_comms,
            subopt_node0=s, mean_sq_dist_to_star=msd,
            consensus_gap=gap, **extras,
        )

    if state.iteration == 0 and not trace.rows:
        record()
    steps_done = 0
    while not budget.exhausted(state.iteration, state.sim_time, subopt):
        if max_steps is not None and steps_done >= max_steps:
            break
        outcome = step(state, params, problem, gossip, cost=cost)
        steps_done += 1
        if state.iteration % cadence == 0 or (record_comms and outcome.kind == "comm"):
            record()
    if not trace.rows or trace.rows[-1][0] != state.iteration:
        record()
    return subopt


def run(problem, gossip, params=None, budget=None, seed=0, z0=None, reference=None,
        cost=None, cadence=None, track_shadow=False, check_invariants=False,
        record_comms=True):
    """Full randomized run; returns a Trace (base schema)."""
    if budget is None:
        raise ValidationError("a budget is required")
    if params is None:
        params = compute_params(problem, gossip)
    if cost is None:
        cost = CostModel(0.0)
    if cadence is None:
        cadence = default_cadence(problem)
    state = init_state(problem, z0=z0, seed=seed, track_shadow=track_shadow,
                       check_invariants=check_invariants)
    trace = Trace(columns=BASE_COLUMNS)
    trace.metadata.update({
        "algorithm": "dvr", "seed": seed, "params": json.loads(params.to_json()),
        "tau": cost.tau,
    })
    drive(state, params, problem, gossip, budget, trace, cost, reference, cadence,
          record_comms=record_comms)
    trace.metadata["final_iteration"] = state.iteration
    return trace, state
