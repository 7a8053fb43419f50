"""Explicit small-instance dual system and reference Bregman coordinate descent.

The constrained reformulation places each node's regularized term at a center
node and one copy of the parameter per sample at virtual nodes; the constraint
matrix A has one block column per edge of that augmented graph. This module
materializes A on small instances, evaluates the dual objective

    obj(lam) = 1/2 * lam^T A^T Sigma A lam + sum_ij conj_ij((A lam)^(ij)),

runs the exact block Bregman coordinate descent in (x, z) coordinates, and
provides executable checks: structural identities, trajectory equivalence with
the distributed method, relative smoothness/strong-convexity certification,
exact-expectation Lyapunov contraction, and primal-recovery constants.

Conjugate values are closed-form for squared losses only; structural and
equivalence checks work for any GLM loss because they never evaluate the
conjugate.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (InfeasibleDualError, UnsupportedLossError,
                         ValidationError)

_SIZE_GUARD = 5000
_SUPPORT_RTOL = 1e-8


@dataclass
class AugmentedSystem:
    problem: object
    graph: object
    alpha: float
    A: np.ndarray            # (n*(1+m)*d, (E + n*m)*d)
    Sigma_diag: np.ndarray   # 1/sigma_i on center-node rows, 0 on virtual rows
    mu_comm: np.ndarray      # (E,)
    mu_comp: np.ndarray      # (n, m), mu_ij^2 = alpha * L_ij
    supports: np.ndarray     # (n, m, d) unit feature directions
    norms2: np.ndarray       # (n, m) squared feature norms
    E: int = 0
    comm_proj: np.ndarray = field(default=None, repr=False)  # pseudoinverse metric on x

    # ---- index helpers -----------------------------------------------------

    @property
    def n(self):
        return self.problem.n

    @property
    def m(self):
        return self.problem.m

    @property
    def d(self):
        return self.problem.d

    def node_rows(self, i):
        return slice(i * self.d, (i + 1) * self.d)

    def virtual_rows(self, i, j):
        k = self.n + i * self.m + j
        return slice(k * self.d, (k + 1) * self.d)

    def comm_cols(self, e):
        return slice(e * self.d, (e + 1) * self.d)

    def virtual_cols(self, i, j):
        k = self.E + i * self.m + j
        return slice(k * self.d, (k + 1) * self.d)


def build_augmented(problem, graph, alpha):
    """Materialize A, Sigma, and the edge scalings for a small instance."""
    n, m, d = problem.n, problem.m, problem.d
    if n * (1 + m) * d > _SIZE_GUARD:
        raise ValidationError(
            f"instance too large for the explicit dual system: n(1+m)d = {n*(1+m)*d} > {_SIZE_GUARD}")
    if alpha <= 0:
        raise ValidationError("alpha must be > 0")
    edges = graph.edge_list if graph is not None else []
    E = len(edges)
    rows = n * (1 + m) * d
    cols = (E + n * m) * d
    A = np.zeros((rows, cols))

    supports = np.empty((n, m, d))
    norms2 = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            x = problem.sample_feature(i, j)
            norms2[i, j] = float(x @ x)
            supports[i, j] = x / math.sqrt(norms2[i, j])

    aug = AugmentedSystem(
        problem=problem, graph=graph, alpha=alpha, A=A,
        Sigma_diag=np.zeros(rows),
        mu_comm=np.ones(E),
        mu_comp=np.sqrt(alpha * problem.L),
        supports=supports, norms2=norms2, E=E,
    )
    eye = np.eye(d)
    for e, (k, l) in enumerate(edges):
        A[aug.node_rows(k), aug.comm_cols(e)] = aug.mu_comm[e] * eye
        A[aug.node_rows(l), aug.comm_cols(e)] = -aug.mu_comm[e] * eye
    for i in range(n):
        for j in range(m):
            P = np.outer(supports[i, j], supports[i, j])
            A[aug.virtual_rows(i, j), aug.virtual_cols(i, j)] = aug.mu_comp[i, j] * P
            A[aug.node_rows(i), aug.virtual_cols(i, j)] = -aug.mu_comp[i, j] * P
    for i in range(n):
        aug.Sigma_diag[aug.node_rows(i)] = 1.0 / problem.sigma[i]

    if E > 0:
        A_comm = A[:, : E * d]
        aug.comm_proj = np.linalg.pinv(A_comm) @ A_comm
    else:
        aug.comm_proj = np.zeros((0, 0))
    _validate_structure(aug)
    return aug


def _validate_structure(aug):
    n, d = aug.n, aug.d
    AAt = aug.A @ aug.A.T
    if aug.graph is not None and aug.E > 0:
        from .topology import laplacian
        W = laplacian(aug.graph).W
        upper = AAt[: n * d, : n * d]
        expected = np.kron(W, np.eye(d))
        # the center rows also pick up the virtual-edge projectors on the diagonal
        for i in range(n):
            for j in range(aug.m):
                P = np.outer(aug.supports[i, j], aug.supports[i, j])
                expected[aug.node_rows(i), aug.node_rows(i)] += aug.mu_comp[i, j] ** 2 * P
        if np.max(np.abs(upper - expected)) > 1e-10 * max(1.0, np.max(np.abs(expected))):
            raise ValidationError("augmented system structure check failed")


def comm_block_of_AAt(aug):
    """The communication-edge part of A A^T restricted to center rows: equals the
    graph Laplacian tensor identity."""
    n, d = aug.n, aug.d
    A_comm = aug.A[: n * d, : aug.E * d]
    return A_comm @ A_comm.T


# ---------------------------------------------------------------------------
# Dual points and the oracle state
# ---------------------------------------------------------------------------

@dataclass
class DualPoint:
    """x: communication-edge multipliers (E*d,); y: virtual multipliers (n,m,d),
    each y[i,j] kept in the rank-1 support of its sample by construction."""

    x: np.ndarray
    y: np.ndarray


def make_dual_point(aug, x, y):
    y = np.asarray(y, dtype=float).reshape(aug.n, aug.m, aug.d)
    coef = np.einsum("nmd,nmd->nm", aug.supports, y)
    y_proj = coef[:, :, None] * aug.supports
    return DualPoint(x=np.asarray(x, dtype=float).ravel().copy(), y=y_proj)


def lam_vec(aug, pt):
    return np.concatenate([pt.x, pt.y.ravel()])


def split_lam(aug, lam):
    E, n, m, d = aug.E, aug.n, aug.m, aug.d
    return make_dual_point(aug, lam[: E * d], lam[E * d:].reshape(n, m, d))


def theta_of(aug, pt):
    """Primal parameters recovered from the dual point: theta_i = (A lam)_i / sigma_i."""
    v = aug.A @ lam_vec(aug, pt)
    n, d = aug.n, aug.d
    theta = v[: n * d].reshape(n, d) / aug.problem.sigma[:, None]
    return theta


def _conj_coef(aug, i, j, g):
    """Coefficient of the support direction in g; rejects off-support arguments."""
    s = aug.supports[i, j]
    t = float(s @ g)
    residual = np.linalg.norm(g - t * s)
    if residual > _SUPPORT_RTOL * (1.0 + np.linalg.norm(g)):
        raise InfeasibleDualError(
            f"dual argument for sample ({i},{j}) leaves its rank-1 support "
            f"(residual {residual:.3e})")
    return t / math.sqrt(aug.norms2[i, j])  # coefficient on the raw feature x


def _conj_value(aug, i, j, c):
    """f_ij^*(c * x_ij) for squared loss w/2 (x^T theta - y)^2: c*y + c^2/(2w)."""
    if aug.problem.loss.kind != "squared":
        raise UnsupportedLossError("closed-form conjugate requires squared loss")
    w = aug.problem.weight
    return c * aug.problem.labels[i, j] + c * c / (2.0 * w)


def dual_value(aug, pt):
    """The dual objective (to be minimized); primal optimum = -min dual."""
    lam = lam_vec(aug, pt)
    v = aug.A @ lam
    quad = 0.5 * float(v @ (aug.Sigma_diag * v))
    conj = 0.0
    for i in range(aug.n):
        for j in range(aug.m):
            g = v[aug.virtual_rows(i, j)]
            conj += _conj_value(aug, i, j, _conj_coef(aug, i, j, g))
    return quad + conj


def dual_gradient(aug, pt):
    """Gradient of the dual objective at pt (squared loss)."""
    if aug.problem.loss.kind != "squared":
        raise UnsupportedLossError("dual gradient requires squared loss")
    lam = lam_vec(aug, pt)
    v = aug.A @ lam
    grad = aug.A.T @ (aug.Sigma_diag * v)
    w = aug.problem.weight
    for i in range(aug.n):
        for j in range(aug.m):
            g = v[aug.virtual_rows(i, j)]
            c = _conj_coef(aug, i, j, g)
            # d conj / d c = y + c/w, then c depends linearly on lam through A
            dcd = (aug.problem.labels[i, j] + c / w) / math.sqrt(aug.norms2[i, j])
            col = aug.A[aug.virtual_rows(i, j), :]
            grad += col.T @ (dcd * aug.supports[i, j])
    return grad


def solve_dual_optimum(aug):
    """Minimum-norm minimizer of the (quadratic, squared-loss) dual objective."""
    if aug.problem.loss.kind != "squared":
        raise UnsupportedLossError("dual optimum solve requires squared loss")
    lam_dim = aug.A.shape[1]
    Q = aug.A.T @ (aug.Sigma_diag[:, None] * aug.A)
    w = aug.problem.weight
    C = np.zeros((aug.n * aug.m, lam_dim))
    labels = np.zeros(aug.n * aug.m)
    for i in range(aug.n):
        for j in range(aug.m):
            r = i * aug.m + j
            # c_ij(lam) = mu_ij * <support, y_ij> / ||x_ij||
            cols = aug.virtual_cols(i, j)
            C[r, cols] = aug.mu_comp[i, j] * aug.supports[i, j] / math.sqrt(aug.norms2[i, j])
            labels[r] = aug.problem.labels[i, j]
    H = Q + (C.T @ C) / w
    b = -C.T @ labels
    lam_star, *_ = np.linalg.lstsq(H, b, rcond=None)
    return split_lam(aug, lam_star)


# ---------------------------------------------------------------------------
# Bregman geometry
# ---------------------------------------------------------------------------

def _coef_of_y(aug, i, j, y_ij):
    """Coefficient c with mu_ij * y_ij = c * x_ij (y is kept on the support)."""
    t = float(aug.supports[i, j] @ y_ij)
    return aug.mu_comp[i, j] * t / math.sqrt(aug.norms2[i, j])


def bregman_divergence(aug, pt_a, pt_b):
    """D_phi(a, b) with phi = 1/2||x||^2 in the pseudoinverse metric of the
    communication block plus alpha^{-1} f^*(mu y) per virtual edge."""
    if aug.problem.loss.kind != "squared":
        raise UnsupportedLossError("bregman divergence requires squared loss")
    total = 0.0
    if aug.E > 0:
        dx = pt_a.x - pt_b.x
        total += 0.5 * float(dx @ (aug.comm_proj @ dx))
    w = aug.problem.weight
    for i in range(aug.n):
        for j in range(aug.m):
            ca = _coef_of_y(aug, i, j, pt_a.y[i, j])
            cb = _coef_of_y(aug, i, j, pt_b.y[i, j])
            total += (ca - cb) ** 2 / (2.0 * w * aug.alpha)
    return total


# ---------------------------------------------------------------------------
# Reference Bregman coordinate descent in (x, z) coordinates
# ---------------------------------------------------------------------------

@dataclass
class OracleState:
    """Dual trajectory state: raw x plus primal-side z (y = grad f(z)/mu)."""

    x: np.ndarray   # (E*d,)
    z: np.ndarray   # (n, m, d)

    def copy(self):
        return OracleState(x=self.x.copy(), z=self.z.copy())


def oracle_init(aug, z0=None):
    z = np.zeros((aug.n, aug.m, aug.d)) if z0 is None else np.array(z0, dtype=float)
    return OracleState(x=np.zeros(aug.E * aug.d), z=z)


def y_of_state(aug, state):
    y = np.empty((aug.n, aug.m, aug.d))
    for i in range(aug.n):
        for j in range(aug.m):
            g = aug.problem.stoch_gradient(i, j, state.z[i, j])
            y[i, j] = g / aug.mu_comp[i, j]
    return y


def point_of_state(aug, state):
    return DualPoint(x=state.x.copy(), y=y_of_state(aug, state))


def oracle_theta(aug, state):
    return theta_of(aug, point_of_state(aug, state))


def bregman_cd_step(aug, state, block, params):
    """One exact block step, in place.

    block: "comm" (Euclidean gradient step of length eta/p_comm on x) or an
    (n,) array of sample indices, one virtual edge per node (the closed-form
    convex-combination move of z towards the recovered theta).
    """
    pt = point_of_state(aug, state)
    lam = lam_vec(aug, pt)
    v = aug.A @ lam
    if isinstance(block, str) and block == "comm":
        if params.p_comm <= 0:
            raise ValidationError("communication block requires p_comm > 0")
        grad_x = aug.A[:, : aug.E * aug.d].T @ (aug.Sigma_diag * v)
        state.x = state.x - (params.eta / params.p_comm) * grad_x
        return state
    j_sel = np.asarray(block, dtype=int)
    if j_sel.shape != (aug.n,):
        raise ValidationError("virtual block must choose exactly one sample per node")
    theta = v[: aug.n * aug.d].reshape(aug.n, aug.d) / aug.problem.sigma[:, None]
    for i in range(aug.n):
        j = int(j_sel[i])
        c = params.alpha * params.eta / params.p_ij[i, j]
        state.z[i, j] = (1.0 - c) * state.z[i, j] + c * theta[i]
    return state


def replay_schedule(aug, params, outcomes, z0=None):
    """Apply a recorded schedule of step outcomes; returns the theta trajectory."""
    state = oracle_init(aug, z0=z0)
    thetas = [oracle_theta(aug, state)]
    for oc in outcomes:
        block = "comm" if oc.kind == "comm" else oc.samples
        bregman_cd_step(aug, state, block, params)
        thetas.append(oracle_theta(aug, state))
    return thetas, state


# ---------------------------------------------------------------------------
# Certification: relative constants, Lyapunov contraction, primal recovery
# ---------------------------------------------------------------------------

def _dual_value_and_grad(aug, pt):
    return dual_value(aug, pt), dual_gradient(aug, pt)


def _d_f(aug, pt_a, pt_b):
    """Bregman divergence of the dual objective D_f(a, b)."""
    fa = dual_value(aug, pt_a)
    fb, gb = _dual_value_and_grad(aug, pt_b)
    delta = lam_vec(aug, pt_a) - lam_vec(aug, pt_b)
    return fa - fb - float(gb @ delta)


def relative_constants(aug, probes=1000, seed=0):
    """Sampled certification of relative smoothness per block and global
    relative strong convexity. Returns analytic constants and worst ratios."""
    problem = aug.problem
    rng = np.random.default_rng(seed)
    L_rel_comm = None
    lam_sigma = None
    if aug.E > 0:
        from .dvr import _weighted_spectrum
        from .topology import laplacian
        W = laplacian(aug.graph).W
        lam_sigma = float(_weighted_spectrum(W, 1.0 / problem.sigma)[-1])
        L_rel_comm = lam_sigma
    L_rel_ij = aug.alpha * (1.0 + problem.L / problem.sigma[:, None])

    worst_comm = 0.0
    worst_virtual = np.zeros((aug.n, aug.m))
    worst_lower = math.inf

    def random_point():
        x = rng.standard_normal(aug.E * aug.d)
        z = rng.standard_normal((aug.n, aug.m, aug.d))
        st = OracleState(x=x, z=z)
        return point_of_state(aug, st)

    for t in range(probes):
        base = random_point()
        kind = t % (2 + (1 if aug.E > 0 else 0))
        if kind == 0:
            # virtual-edge direction
            i = int(rng.integers(aug.n))
            j = int(rng.integers(aug.m))
            delta = float(rng.standard_normal()) * aug.supports[i, j]
            other = DualPoint(x=base.x.copy(), y=base.y.copy())
            other.y[i, j] = other.y[i, j] + delta
            df = _d_f(aug, other, base)
            dphi = bregman_divergence(aug, other, base)
            if dphi > 0:
                worst_virtual[i, j] = max(worst_virtual[i, j], df / dphi)
            ratio_low = df / dphi if dphi > 0 else math.inf
            worst_lower = min(worst_lower, ratio_low)
        elif kind == 1 and aug.E > 0:
            dx = rng.standard_normal(aug.E * aug.d)
            other = DualPoint(x=base.x + dx, y=base.y.copy())
            df = _d_f(aug, other, base)
            dphi = bregman_divergence(aug, other, base)
            if dphi > 0:
                worst_comm = max(worst_comm, df / dphi)
                worst_lower = min(worst_lower, df / dphi)
        else:
            other = random_point()
            df = _d_f(aug, other, base)
            dphi = bregman_divergence(aug, other, base)
            if dphi > 0:
                worst_lower = min(worst_lower, df / dphi)

    excess = worst_virtual / L_rel_ij
    return {
        "alpha": aug.alpha,
        "L_rel_comm": L_rel_comm,
        "L_rel_ij": L_rel_ij,
        "worst_comm_ratio": worst_comm,
        "worst_virtual_ratio": worst_virtual,
        "max_virtual_excess": float(excess.max()),
        "worst_lower_ratio": worst_lower,
        "lower_bound": aug.alpha / 2.0,
        "pass_upper": bool(excess.max() <= 1.0 + 1e-6
                           and (L_rel_comm is None or worst_comm <= L_rel_comm * (1.0 + 1e-6))),
        "pass_lower": bool(worst_lower >= (aug.alpha / 2.0) * (1.0 - 1e-6)),
    }


def _lyapunov(aug, params, state, lam_star_pt, f_star, p_min):
    pt = point_of_state(aug, state)
    return (bregman_divergence(aug, lam_star_pt, pt)
            + (params.eta / p_min) * (dual_value(aug, pt) - f_star))


def lyapunov_check(aug, params, steps=50, seed=0, z0=None):
    """Exact-expectation contraction of the Lyapunov function along a random
    trajectory, enumerating the whole block distribution at each point."""
    problem = aug.problem
    n, m = aug.n, aug.m
    p_comm = params.p_comm
    p_min = float(min(params.p_ij.min(), p_comm) if p_comm > 0 else params.p_ij.min())

    # Theorem hypothesis eta * L_rel^b <= p_b per block
    violations = []
    if p_comm > 0:
        rc_probe = relative_constants(aug, probes=0)
        L_rel_comm = rc_probe["L_rel_comm"]
        if params.eta * L_rel_comm > p_comm * (1.0 + 1e-9):
            violations.append("comm")
    L_rel_ij = aug.alpha * (1.0 + problem.L / problem.sigma[:, None])
    if np.any(params.eta * L_rel_ij > params.p_ij * (1.0 + 1e-9)):
        violations.append("virtual")
    report = {
        "hypothesis_ok": not violations,
        "violations": violations,
        "bound": 1.0 - params.eta * aug.alpha / 2.0,
        "ratios": [],
        "p_min": p_min,
    }
    if violations:
        return report

    lam_star_pt = solve_dual_optimum(aug)
    f_star = dual_value(aug, lam_star_pt)
    rng = np.random.default_rng(seed)
    state = oracle_init(aug, z0=z0)
    combos = list(itertools.product(range(m), repeat=n))
    cond = params.p_ij / (1.0 - p_comm) if p_comm < 1.0 else params.p_ij

    for _ in range(steps):
        L_t = _lyapunov(aug, params, state, lam_star_pt, f_star, p_min)
        exp_next = 0.0
        if p_comm > 0:
            succ = state.copy()
            bregman_cd_step(aug, succ, "comm", params)
            exp_next += p_comm * _lyapunov(aug, params, succ, lam_star_pt, f_star, p_min)
        for combo in combos:
            prob = (1.0 - p_comm) * float(np.prod([cond[i, combo[i]] for i in range(n)]))
            succ = state.copy()
            bregman_cd_step(aug, succ, np.asarray(combo), params)
            exp_next += prob * _lyapunov(aug, params, succ, lam_star_pt, f_star, p_min)
        if L_t > 1e-14:
            report["ratios"].append(exp_next / L_t)
        # advance along a random realization
        if rng.random() < p_comm:
            bregman_cd_step(aug, state, "comm", params)
        else:
            j = np.array([int(rng.choice(m, p=cond[i])) for i in range(n)])
            bregman_cd_step(aug, state, j, params)
    report["max_ratio"] = max(report["ratios"]) if report["ratios"] else float("nan")
    report["pass"] = bool(report["ratios"]) and report["max_ratio"] <= report["bound"] + 1e-9
    return report


def primal_error_constant(aug, params, z0=None, lam_star_pt=None):
    """Envelope constant for the distance of the recovered primal parameters to
    the optimum: sum_i ||theta_t - theta*||^2 <= C0 * (1 - eta*alpha/2)^t."""
    problem = aug.problem
    if lam_star_pt is None:
        lam_star_pt = solve_dual_optimum(aug)
    state0 = oracle_init(aug, z0=z0)
    pt0 = point_of_state(aug, state0)
    p_comm = params.p_comm
    p_min = float(min(params.p_ij.min(), p_comm) if p_comm > 0 else params.p_ij.min())
    d_phi = bregman_divergence(aug, lam_star_pt, pt0)
    gap = dual_value(aug, pt0) - dual_value(aug, lam_star_pt)
    sigma = problem.sigma
    L_max = float(problem.L.max())
    front = 2.0 * (float(sigma.max()) + L_max) / float(sigma.min()) ** 2
    return front * ((p_min / params.eta) * d_phi + gap)


def primal_error_constant_large(problem, gossip, params, theta_star, z0=None):
    """Same constant computed without materializing A (squared loss only):
    everything reduces to node-level quantities and the n x n gossip spectrum."""
    if problem.loss.kind != "squared":
        raise UnsupportedLossError("envelope constant requires squared loss")
    n, m, d = problem.n, problem.m, problem.d
    if z0 is None:
        z0 = np.zeros((n, m, d))
    w = problem.weight
    alpha, eta = params.alpha, params.eta
    p_comm = params.p_comm
    p_min = float(min(params.p_ij.min(), p_comm) if p_comm > 0 else params.p_ij.min())

    # conjugate-side coefficients c = w (x^T theta - label) per sample
    c_star = np.empty((n, m))
    c_0 = np.empty((n, m))
    for i in range(n):
        X = problem.features[i] if problem.is_dense else problem.features[i].toarray()
        c_star[i] = w * (X @ theta_star - problem.labels[i])
        c_0[i] = w * (np.einsum("md,md->m", X, z0[i]) - problem.labels[i])

    # communication Bregman term: x* is the minimum-norm edge representation of
    # the stacked local full gradients; its squared seminorm is a W-pseudoinverse
    # quadratic form, computable at n x n scale.
    d_phi = float(np.sum((c_star - c_0) ** 2) / (2.0 * w * alpha))
    if p_comm > 0:
        x_tilde_star = np.stack([problem.full_gradient(i, theta_star) for i in range(n)])
        W = gossip.W
        eigvals, eigvecs = np.linalg.eigh(W)
        cutoff = 1e-9 * eigvals[-1]
        inv = np.where(eigvals > cutoff, 1.0 / np.maximum(eigvals, cutoff), 0.0)
        proj = eigvecs.T @ x_tilde_star  # spectral coordinates per column
        d_phi += 0.5 * float(np.sum(inv[:, None] * proj ** 2))

    def conj_sum(c):
        return float(np.sum(c * problem.labels) + np.sum(c * c) / (2.0 * w))

    # dual objective at lambda_0 (x=0) and at the optimum
    g0 = problem.cache_gradients(z0).sum(axis=1)   # (A lam_0)_i = -sum_j grad f_ij(z0)
    obj_0 = 0.5 * float(np.sum(np.sum(g0 ** 2, axis=1) / problem.sigma)) + conj_sum(c_0)
    obj_star = 0.5 * float(np.sum(problem.sigma) * float(theta_star @ theta_star)) \
        + conj_sum(c_star)
    gap = obj_0 - obj_star

    front = 2.0 * (float(problem.sigma.max()) + float(problem.L.max())) \
        / float(problem.sigma.min()) ** 2
    return front * ((p_min / eta) * d_phi + gap)


# ---------------------------------------------------------------------------
# Default verification suite
# ---------------------------------------------------------------------------

def verification_report(aug=None, probes=2000, steps=25, seed=0):
    """Run the default oracle suite and return a JSON-ready report."""
    from . import dvr as _dvr
    from .harness import reference_solution
    from .problem import build_problem, synth_dataset
    from .topology import build_graph, laplacian

    if aug is None:
        graph = build_graph("ring", 3)
        data = synth_dataset(6, 3, "squared", seed=11)
        problem = build_problem(data, n=3, sigma=0.5, loss="squared")
        gossip = laplacian(graph)
        params = _dvr.compute_params(problem, gossip)
        aug = build_augmented(problem, graph, params.alpha)
    else:
        graph = aug.graph
        problem = aug.problem
        gossip = laplacian(graph)
        params = _dvr.compute_params(problem, gossip)

    checks = []

    # structural: communication block of A A^T equals the Laplacian
    W = gossip.W
    diff = float(np.max(np.abs(comm_block_of_AAt(aug) - np.kron(W, np.eye(aug.d)))))
    checks.append({"name": "comm_block_equals_laplacian", "bound": 1e-10,
                   "worst": diff, "pass": diff <= 1e-10})

    # projector idempotence
    worst_p = 0.0
    for i in range(aug.n):
        for j in range(aug.m):
            P = np.outer(aug.supports[i, j], aug.supports[i, j])
            worst_p = max(worst_p, float(np.max(np.abs(P @ P - P))))
    checks.append({"name": "projectors_idempotent", "bound": 1e-12,
                   "worst": worst_p, "pass": worst_p <= 1e-12})

    # strong duality
    theta_star, f_star = reference_solution(problem)
    lam_star = solve_dual_optimum(aug)
    gap = abs(f_star + dual_value(aug, lam_star))
    checks.append({"name": "strong_duality", "bound": 1e-8,
                   "worst": gap, "pass": gap <= 1e-8})

    # trajectory equivalence against the distributed method
    state = _dvr.init_state(problem, seed=seed)
    outcomes = []
    thetas_dvr = [state.theta.copy()]
    for _ in range(200):
        outcomes.append(_dvr.step(state, params, problem, gossip))
        thetas_dvr.append(state.theta.copy())
    thetas_orc, _ = replay_schedule(aug, params, outcomes)
    worst_eq = max(float(np.max(np.abs(a - b))) for a, b in zip(thetas_dvr, thetas_orc))
    checks.append({"name": "trajectory_equivalence", "bound": 1e-8,
                   "worst": worst_eq, "pass": worst_eq <= 1e-8})

    rc = relative_constants(aug, probes=probes, seed=seed)
    checks.append({"name": "relative_smoothness", "bound": 1.0 + 1e-6,
                   "worst": rc["max_virtual_excess"], "pass": rc["pass_upper"]})
    checks.append({"name": "relative_strong_convexity",
                   "bound": rc["lower_bound"] * (1.0 - 1e-6),
                   "worst": rc["worst_lower_ratio"], "pass": rc["pass_lower"]})

    ly = lyapunov_check(aug, params, steps=steps, seed=seed)
    checks.append({"name": "lyapunov_contraction", "bound": ly["bound"] + 1e-9,
                   "worst": ly.get("max_ratio", float("nan")),
                   "pass": bool(ly.get("pass", False))})

    report = {"checks": checks, "all_pass": all(c["pass"] for c in checks)}
    return report


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True, default=_default)


def _default(obj):
    import numpy as _np
    if isinstance(obj, _np.ndarray):
        return obj.tolist()
    if isinstance(obj, (_np.integer,)):
        return int(obj)
    if isinstance(obj, (_np.floating,)):
        return float(obj)
    if isinstance(obj, (_np.bool_,)):
        return bool(obj)
    raise TypeError(str(type(obj)))
