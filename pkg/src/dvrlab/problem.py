"""Finite-sum objectives: loss families, datasets, partitioning, and derived constants.

Global objective: F(theta) = sum_i [ sigma_i/2 ||theta||^2 + sum_j f_ij(theta) ] with
GLM sample losses f_ij(theta) = weight * loss(x_ij^T theta; y_ij) and weight = 1/m.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .exceptions import ValidationError

_POWER_ITERS = 200
_POWER_REL_TOL = 1e-10


@dataclass(frozen=True)
class LossFamily:
    """Scalar GLM loss of the pre-activation u = x^T theta and label y."""

    kind: str  # "logistic" | "squared"
    curvature_bound: float  # sup of the second derivative in u

    def value(self, u, y):
        if self.kind == "logistic":
            return np.logaddexp(0.0, -y * u)
        return 0.5 * (u - y) ** 2

    def grad_coef(self, u, y):
        """d loss / du."""
        if self.kind == "logistic":
            return -y * expit(-y * u)
        return u - y

    def validate_labels(self, labels):
        if self.kind == "logistic":
            bad = np.nonzero(~np.isin(labels, (-1.0, 1.0)))[0]
            if bad.size:
                raise ValidationError(
                    f"logistic labels must be +/-1; offending sample index {bad[0]} "
                    f"(value {labels[bad[0]]})"
                )


LOGISTIC = LossFamily("logistic", 0.25)
SQUARED = LossFamily("squared", 1.0)
_LOSSES = {"logistic": LOGISTIC, "squared": SQUARED}


def loss_family(kind):
    if isinstance(kind, LossFamily):
        return kind
    try:
        return _LOSSES[kind]
    except KeyError:
        raise ValidationError(f"unknown loss kind {kind!r}") from None


@dataclass
class Dataset:
    """Feature matrix (N, d), labels (N,), and an optional per-sample weight."""

    features: object  # ndarray or scipy.sparse matrix
    labels: np.ndarray
    weight: float = None

    def __post_init__(self):
        N = self.features.shape[0]
        if N == 0:
            raise ValidationError("empty dataset")
        if self.labels.shape != (N,):
            raise ValidationError("labels must be one per sample")
        if sp.issparse(self.features):
            row_norms = np.sqrt(np.asarray(self.features.multiply(self.features).sum(axis=1)).ravel())
        else:
            row_norms = np.linalg.norm(self.features, axis=1)
        zero = np.nonzero(row_norms == 0.0)[0]
        if zero.size:
            raise ValidationError(f"all-zero feature row at sample index {zero[0]}")

    @property
    def N(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]


def load_libsvm(path, loss=None):
    """Parse a libsvm-format text file ("label idx:val ...", 1-indexed indices).

    When ``loss`` is given, labels are validated for that loss family.
    Malformed lines raise ValidationError naming the line number.
    """
    labels, rows, cols, vals = [], [], [], []
    d = 0
    n_lines = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError:
                raise ValidationError(f"{path}: line {lineno}: bad label {parts[0]!r}") from None
            if loss is not None and loss_family(loss).kind == "logistic" and label not in (-1.0, 1.0):
                raise ValidationError(f"{path}: line {lineno}: logistic label must be +/-1, got {label}")
            for tok in parts[1:]:
                try:
                    idx_s, val_s = tok.split(":")
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise ValidationError(f"{path}: line {lineno}: bad pair {tok!r}") from None
                if idx < 1:
                    raise ValidationError(f"{path}: line {lineno}: feature indices are 1-based, got {idx}")
                rows.append(n_lines)
                cols.append(idx - 1)
                vals.append(val)
                d = max(d, idx)
            labels.append(label)
            n_lines += 1
    if n_lines == 0:
        raise ValidationError(f"{path}: empty file")
    features = sp.csr_matrix((vals, (rows, cols)), shape=(n_lines, d))
    return Dataset(features=features, labels=np.asarray(labels, dtype=float))


def synth_dataset(N, d, kind, seed, scale=1.0):
    """Gaussian features with row norms capped at ``scale``; labels from a planted
    linear model (sign of the linear response for logistic, exact response for
    squared, so the planted vector interpolates). Deterministic given seed."""
    if N < 1 or d < 1:
        raise ValidationError("N and d must be >= 1")
    loss = loss_family(kind)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, d))
    norms = np.linalg.norm(X, axis=1)
    factor = np.minimum(1.0, scale / np.maximum(norms, 1e-300))
    X = X * factor[:, None]
    w_star = rng.standard_normal(d)
    response = X @ w_star
    if loss.kind == "logistic":
        labels = np.where(response >= 0.0, 1.0, -1.0)
    else:
        labels = response
    return Dataset(features=X, labels=labels)


@dataclass
class Problem:
    n: int
    m: int
    d: int
    loss: LossFamily
    sigma: np.ndarray            # (n,)
    features: object             # dense (n, m, d) array, or list of n sparse (m, d) matrices
    labels: np.ndarray           # (n, m)
    weight: float                # per-sample weight (1/m)
    L: np.ndarray                # (n, m) per-sample smoothness
    kappa_s: float
    D_M: np.ndarray              # (n,)
    truncated: bool = False
    kappa_b_override: float = None
    _flat_features: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(self.sigma <= 0):
            raise ValidationError("sigma entries must be > 0")
        if self.is_dense and self._flat_features is None:
            self._flat_features = np.ascontiguousarray(self.features.reshape(self.n * self.m, self.d))

    @property
    def is_dense(self):
        return isinstance(self.features, np.ndarray)

    # ---- per-sample access -------------------------------------------------

    def sample_feature(self, i, j):
        if self.is_dense:
            return self.features[i, j]
        return np.asarray(self.features[i].getrow(j).todense()).ravel()

    def stoch_gradient(self, i, j, theta):
        """Gradient of the sample loss f_ij (no regularizer term)."""
        if not (0 <= i < self.n and 0 <= j < self.m):
            raise ValidationError(f"sample index ({i},{j}) out of range")
        x = self.sample_feature(i, j)
        u = float(x @ theta)
        return (self.weight * self.loss.grad_coef(u, self.labels[i, j])) * x

    def sample_value(self, i, j, theta):
        x = self.sample_feature(i, j)
        return self.weight * float(self.loss.value(float(x @ theta), self.labels[i, j]))

    # ---- node-level operations ----------------------------------------------

    def node_loss_gradient(self, i, theta):
        """sum_j grad f_ij(theta), without the regularizer."""
        if self.is_dense:
            X = self.features[i]
            coefs = self.weight * self.loss.grad_coef(X @ theta, self.labels[i])
            return X.T @ coefs
        X = self.features[i]
        coefs = self.weight * self.loss.grad_coef(X @ theta, self.labels[i])
        return X.T @ coefs

    def full_gradient(self, i, theta):
        """sigma_i * theta + sum_j grad f_ij(theta)."""
        if not 0 <= i < self.n:
            raise ValidationError(f"node index {i} out of range")
        return self.sigma[i] * theta + self.node_loss_gradient(i, theta)

    def stacked_full_gradients(self, theta_rows):
        """Full local gradients for all nodes; theta_rows is (n, d)."""
        out = np.empty_like(theta_rows)
        for i in range(self.n):
            out[i] = self.full_gradient(i, theta_rows[i])
        return out

    def sampled_gradients(self, points, j_sel):
        """grad f_{i, j_sel[i]} evaluated at points[i] for every node, (n, d) -> (n, d)."""
        if self.is_dense:
            idx = np.arange(self.n) * self.m + j_sel
            X = self._flat_features[idx]
            y = self.labels[np.arange(self.n), j_sel]
            u = np.einsum("nd,nd->n", X, points)
            coefs = self.weight * self.loss.grad_coef(u, y)
            return coefs[:, None] * X
        out = np.empty((self.n, self.d))
        for i in range(self.n):
            out[i] = self.stoch_gradient(i, int(j_sel[i]), points[i])
        return out

    def cache_gradients(self, z):
        """grad f_ij(z[i, j]) for all (i, j); z is (n, m, d)."""
        out = np.empty((self.n, self.m, self.d))
        for i in range(self.n):
            if self.is_dense:
                X = self.features[i]
                u = np.einsum("md,md->m", X, z[i])
                coefs = self.weight * self.loss.grad_coef(u, self.labels[i])
                out[i] = coefs[:, None] * X
            else:
                for j in range(self.m):
                    out[i, j] = self.stoch_gradient(i, j, z[i, j])
        return out

    # ---- objective values ----------------------------------------------------

    def node_objective(self, i, theta):
        if self.is_dense:
            X = self.features[i]
            vals = self.loss.value(X @ theta, self.labels[i])
        else:
            vals = self.loss.value(self.features[i] @ theta, self.labels[i])
        return 0.5 * self.sigma[i] * float(theta @ theta) + self.weight * float(np.sum(vals))

    def objective(self, theta):
        """Global objective F(theta) = sum over nodes."""
        return sum(self.node_objective(i, theta) for i in range(self.n))

    def global_gradient(self, theta):
        g = np.sum(self.sigma) * theta
        for i in range(self.n):
            g = g + self.node_loss_gradient(i, theta)
        return g

    # ---- derived constants -----------------------------------------------------

    @property
    def smoothness_global(self):
        """Upper bound on the global objective's smoothness."""
        return float(np.sum(self.sigma) + np.sum(self.L))

    @property
    def strong_convexity_global(self):
        return float(np.sum(self.sigma))

    def kappa_b(self, mode="estimate"):
        """Batch condition number: 'bound' (conservative), 'estimate' (power
        iteration on the local Hessian at theta=0), or a user override set on
        construction (mode='override')."""
        if mode == "override":
            if self.kappa_b_override is None:
                raise ValidationError("no kappa_b override was provided")
            return float(self.kappa_b_override)
        if mode == "bound":
            return float(np.max((1.0 + self.L.sum(axis=1)) / self.sigma))
        if mode != "estimate":
            raise ValidationError(f"unknown kappa_b mode {mode!r}")
        worst = 0.0
        for i in range(self.n):
            lam = _power_iteration_hessian(self, i)
            worst = max(worst, (self.sigma[i] + lam) / self.sigma[i])
        return float(worst)

    def batch_smoothness(self, mode="estimate"):
        """max_i smoothness of the full local objective f_i (sigma included)."""
        if mode == "bound":
            return float(np.max(self.sigma + self.L.sum(axis=1)))
        worst = 0.0
        for i in range(self.n):
            worst = max(worst, self.sigma[i] + _power_iteration_hessian(self, i))
        return float(worst)

    def summary(self):
        return {
            "n": self.n, "m": self.m, "d": self.d,
            "loss": self.loss.kind,
            "sigma": self.sigma.tolist(),
            "kappa_s": self.kappa_s,
            "kappa_b_bound": self.kappa_b("bound"),
            "kappa_b_estimate": self.kappa_b("estimate"),
            "D_M": self.D_M.tolist(),
            "truncated": self.truncated,
        }

    def summary_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def _power_iteration_dm(X, L_row):
    """lambda_max of sum_j L_j * x_j x_j^T / ||x_j||^2 via power iteration."""
    norms2 = np.einsum("md,md->m", X, X) if isinstance(X, np.ndarray) else np.asarray(
        X.multiply(X).sum(axis=1)).ravel()
    coef = L_row / norms2
    d = X.shape[1]
    v = np.ones(d) / math.sqrt(d)
    lam = 0.0
    for _ in range(_POWER_ITERS):
        w = X.T @ (coef * (X @ v))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return float(np.sum(L_row))  # degenerate start; fall back to the sum bound
        v_new = w / norm
        lam_new = float(v_new @ (X.T @ (coef * (X @ v_new))))
        if abs(lam_new - lam) <= _POWER_REL_TOL * max(abs(lam_new), 1e-300):
            return lam_new
        lam, v = lam_new, v_new
    return lam


def _power_iteration_hessian(problem, i):
    """lambda_max of the loss part of the local Hessian at theta = 0."""
    X = problem.features[i]
    if problem.is_dense:
        # for both families the scalar loss curvature at u=0 equals the declared bound
        coef = np.full(problem.m, problem.weight * problem.loss.curvature_bound)
        d = problem.d
        v = np.ones(d) / math.sqrt(d)
        lam = 0.0
        for _ in range(_POWER_ITERS):
            w = X.T @ (coef * (X @ v))
            norm = np.linalg.norm(w)
            if norm == 0.0:
                return 0.0
            v = w / norm
            lam_new = float(v @ (X.T @ (coef * (X @ v))))
            if abs(lam_new - lam) <= _POWER_REL_TOL * max(abs(lam_new), 1e-300):
                return lam_new
            lam = lam_new
        return lam
    coef = problem.weight * problem.loss.curvature_bound
    M = (X.T @ X).toarray() * coef
    return float(np.linalg.eigvalsh(M)[-1])


def build_problem(dataset, n, sigma, loss, shuffle_seed=None, kappa_b_override=None):
    """Partition a dataset over n nodes (contiguous blocks, optional seeded
    shuffle) and compute every derived constant. If N is not divisible by n the
    tail is dropped and ``truncated`` is flagged."""
    loss = loss_family(loss)
    loss.validate_labels(dataset.labels)
    N, d = dataset.N, dataset.d
    if n < 1 or n > N:
        raise ValidationError(f"need 1 <= n <= N, got n={n}, N={N}")
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (n,)).copy()
    if np.any(sigma <= 0):
        raise ValidationError("sigma entries must be > 0")
    m = N // n
    truncated = (m * n != N)

    order = np.arange(N)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(N)
    order = order[: n * m]

    weight = 1.0 / m
    labels = dataset.labels[order].reshape(n, m)
    if sp.issparse(dataset.features):
        feats_all = dataset.features.tocsr()[order]
        features = [feats_all[i * m:(i + 1) * m] for i in range(n)]
        norms2 = np.asarray(feats_all.multiply(feats_all).sum(axis=1)).ravel().reshape(n, m)
    else:
        features = np.ascontiguousarray(dataset.features[order].reshape(n, m, d))
        norms2 = np.einsum("nmd,nmd->nm", features, features)

    L = loss.curvature_bound * weight * norms2
    kappa_s = float(np.max((1.0 + L.sum(axis=1)) / sigma))

    D_M = np.empty(n)
    for i in range(n):
        X = features[i] if isinstance(features, np.ndarray) else features[i]
        if sp.issparse(X):
            lam = _power_iteration_dm(X.toarray(), L[i])
        else:
            lam = _power_iteration_dm(X, L[i])
        D_M[i] = sigma[i] + min(lam, float(L[i].sum()))

    return Problem(
        n=n, m=m, d=d, loss=loss, sigma=sigma, features=features, labels=labels,
        weight=weight, L=L, kappa_s=kappa_s, D_M=D_M, truncated=truncated,
        kappa_b_override=kappa_b_override,
    )


def shifted_problem(problem, beta):
    """The same data with regularization sigma_i + beta (used by proximal wrappers).

    beta == 0 returns an object whose constants are bitwise-identical.
    """
    if beta < 0:
        raise ValidationError("beta must be >= 0")
    if beta == 0.0:
        return problem
    sigma = problem.sigma + beta
    kappa_s = float(np.max((1.0 + problem.L.sum(axis=1)) / sigma))
    D_M = (problem.D_M - problem.sigma) + sigma
    return Problem(
        n=problem.n, m=problem.m, d=problem.d, loss=problem.loss, sigma=sigma,
        features=problem.features, labels=problem.labels, weight=problem.weight,
        L=problem.L, kappa_s=kappa_s, D_M=D_M, truncated=problem.truncated,
        kappa_b_override=problem.kappa_b_override,
        _flat_features=problem._flat_features,
    )
