"""Communication graphs, gossip matrices, and polynomial-accelerated gossip operators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConstructionError, ValidationError

GRAPH_KINDS = ("erdos_renyi", "grid", "ring", "path", "complete", "custom")

# relative cutoff separating the zero eigenvalues from lambda_min_plus
_ZERO_EIG_REL_TOL = 1e-9
_ER_MAX_RESAMPLES = 100


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph on nodes 0..n-1."""

    n: int
    edges: frozenset
    kind: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"node count must be >= 1, got {self.n}")
        if self.kind not in GRAPH_KINDS:
            raise ValidationError(f"unknown graph kind {self.kind!r}")
        norm = set()
        for (k, l) in self.edges:
            if k == l:
                raise ValidationError(f"self-loop on node {k}")
            if not (0 <= k < self.n and 0 <= l < self.n):
                raise ValidationError(f"edge ({k},{l}) out of range for n={self.n}")
            pair = (min(k, l), max(k, l))
            if pair in norm:
                raise ValidationError(f"duplicate edge {pair}")
            norm.add(pair)
        object.__setattr__(self, "edges", frozenset(norm))
        if not _is_connected(self.n, norm):
            raise ValidationError("graph is not connected")

    @property
    def edge_list(self):
        """Edges as a sorted list of (k, l) with k < l."""
        return sorted(self.edges)

    def degree(self, k):
        return sum(1 for (a, b) in self.edges if a == k or b == k)


def _is_connected(n, edges):
    if n == 1:
        return True
    adj = [[] for _ in range(n)]
    for (k, l) in edges:
        adj[k].append(l)
        adj[l].append(k)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == n


def build_graph(kind, n, params=None, seed=0):
    """Build a connected graph of the given kind.

    params: for erdos_renyi a dict {"p": edge probability}; ignored otherwise.
    Erdos-Renyi sampling procedure (deterministic given seed): iterate node pairs
    (i, j) with i < j in lexicographic order, include the edge when
    rng.random() < p with rng = numpy.random.default_rng(seed). If the result is
    disconnected, retry with seed+1, seed+2, ... up to 100 attempts.
    """
    if n < 1:
        raise ValidationError(f"node count must be >= 1, got {n}")
    params = params or {}
    if kind == "complete":
        edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    elif kind == "ring":
        if n < 3:
            edges = {(i, i + 1) for i in range(n - 1)}
        else:
            edges = {(i, (i + 1) % n) for i in range(n)}
            edges = {(min(a, b), max(a, b)) for (a, b) in edges}
    elif kind == "path":
        edges = {(i, i + 1) for i in range(n - 1)}
    elif kind == "grid":
        s = math.isqrt(n)
        if s * s != n:
            raise ValidationError(f"grid requires a perfect square node count, got {n}")
        edges = set()
        for r in range(s):
            for c in range(s):
                u = r * s + c
                if c + 1 < s:
                    edges.add((u, u + 1))
                if r + 1 < s:
                    edges.add((u, u + s))
    elif kind == "erdos_renyi":
        p = params.get("p")
        if p is None or not (0.0 < p <= 1.0):
            raise ValidationError(f"erdos_renyi requires edge probability p in (0,1], got {p}")
        for attempt in range(_ER_MAX_RESAMPLES):
            rng = np.random.default_rng(seed + attempt)
            edges = set()
            for i in range(n):
                for j in range(i + 1, n):
                    if rng.random() < p:
                        edges.add((i, j))
            if _is_connected(n, edges):
                return Graph(n=n, edges=frozenset(edges), kind=kind)
        raise ConstructionError(
            f"no connected erdos_renyi graph (n={n}, p={p}) within {_ER_MAX_RESAMPLES} resamples"
        )
    else:
        raise ValidationError(f"unknown graph kind {kind!r}")
    return Graph(n=n, edges=frozenset(edges), kind=kind)


@dataclass(frozen=True)
class GossipMatrix:
    """Symmetric PSD gossip operator with kernel Span(1) and its spectral summary.

    For polynomial-accelerated operators ``W`` stores the dense materialization
    (used for spectral/parameter computations) while :meth:`apply` evaluates the
    operator through the three-term recurrence on the base matrix.
    """

    W: np.ndarray
    gamma: float
    lambda_max: float
    lambda_min_plus: float
    effective_degree: int = 1
    # (base_W, degree, c2, c3, t_deg) when the operator is a polynomial in a base matrix
    _poly: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        W = self.W
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValidationError("gossip matrix must be square")
        if self.lambda_max <= 0:
            raise ValidationError("lambda_max must be > 0 (graph with at least one edge required)")
        if not (0.0 < self.gamma <= 1.0 + 1e-12):
            raise ValidationError(f"spectral gap must lie in (0,1], got {self.gamma}")
        n = W.shape[0]
        ones = np.ones(n)
        if np.linalg.norm(W @ ones) > 1e-10 * self.lambda_max * math.sqrt(n):
            raise ValidationError("gossip matrix kernel must contain the all-ones vector")

    @property
    def n(self):
        return self.W.shape[0]

    def apply(self, theta):
        """Apply the operator to a vector or an (n, d) block of columns."""
        if self._poly is None:
            return self.W @ theta
        base_W, degree, c2, c3, t_deg = self._poly
        t_prev = theta
        t_cur = c2 * (theta - c3 * (base_W @ theta))
        for _ in range(degree - 1):
            t_next = 2.0 * c2 * (t_cur - c3 * (base_W @ t_cur)) - t_prev
            t_prev, t_cur = t_cur, t_next
        return (theta - t_cur / t_deg) / (1.0 + 1.0 / t_deg)


def _spectral_summary(eigvals):
    lam_max = float(eigvals[-1])
    if lam_max <= 0:
        raise ValidationError("operator has no positive eigenvalue")
    cutoff = _ZERO_EIG_REL_TOL * lam_max
    positive = eigvals[eigvals > cutoff]
    if positive.size == 0:
        raise ValidationError("operator has no eigenvalue above the zero cutoff")
    lam_min_plus = float(positive[0])
    if eigvals[0] < -1e-10 * lam_max:
        raise ValidationError(f"operator is not PSD (min eigenvalue {eigvals[0]:.3e})")
    return lam_max, lam_min_plus, lam_min_plus / lam_max


def laplacian(graph):
    """Gossip matrix W = D - Adj of a connected graph with at least one edge."""
    n = graph.n
    if n < 2 or not graph.edges:
        raise ValidationError("laplacian requires a graph with at least one edge")
    W = np.zeros((n, n))
    for (k, l) in graph.edge_list:
        W[k, l] = -1.0
        W[l, k] = -1.0
        W[k, k] += 1.0
        W[l, l] += 1.0
    eigvals = np.linalg.eigvalsh(W)
    lam_max, lam_min_plus, gamma = _spectral_summary(eigvals)
    return GossipMatrix(
        W=W, gamma=gamma, lambda_max=lam_max, lambda_min_plus=lam_min_plus, effective_degree=1
    )


def _cheb_scalar(degree, x):
    """Chebyshev polynomial T_degree evaluated by the three-term recurrence."""
    t_prev = np.ones_like(np.asarray(x, dtype=float))
    t_cur = np.asarray(x, dtype=float).copy()
    for _ in range(degree - 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
    return t_cur if degree >= 1 else t_prev


def chebyshev(gossip, degree=None):
    """Polynomial-accelerated gossip operator with an improved spectral gap.

    The nonzero spectrum [lambda_min_plus, lambda_max] of the input is mapped by
    the minimax Chebyshev construction so the transformed nonzero spectrum lies
    in [c, 1] with c = (T_K(c2) - 1)/(T_K(c2) + 1); the kernel stays Span(1).
    Application uses the three-term recurrence (degree multiplications by the
    base matrix per call), never a dense polynomial expansion.
    """
    if gossip.effective_degree != 1 or gossip._poly is not None:
        raise ValidationError("chebyshev acceleration requires a plain degree-1 gossip matrix")
    gamma = gossip.gamma
    if degree is None:
        degree = max(1, math.ceil(1.0 / math.sqrt(gamma)))
    if degree < 1:
        raise ValidationError(f"polynomial degree must be >= 1, got {degree}")

    if 1.0 - gamma < 1e-12:
        # gap already 1: rescaling by lambda_max is optimal and the minimax map degenerates
        return GossipMatrix(
            W=gossip.W / gossip.lambda_max, gamma=gossip.gamma, lambda_max=1.0,
            lambda_min_plus=gossip.lambda_min_plus / gossip.lambda_max,
            effective_degree=degree, _poly=None,
        )

    lam_max, lam_min = gossip.lambda_max, gossip.lambda_min_plus
    c2 = (lam_max + lam_min) / (lam_max - lam_min)
    c3 = 2.0 / (lam_max + lam_min)
    t_deg = float(_cheb_scalar(degree, np.asarray(c2)))

    eigvals, eigvecs = np.linalg.eigh(gossip.W)
    transformed = (1.0 - _cheb_scalar(degree, c2 * (1.0 - c3 * eigvals)) / t_deg) / (1.0 + 1.0 / t_deg)
    # keep the kernel exact: the map sends 0 to 0 by construction, clean up roundoff
    transformed[np.abs(eigvals) <= _ZERO_EIG_REL_TOL * lam_max] = 0.0
    W_poly = (eigvecs * transformed) @ eigvecs.T
    W_poly = (W_poly + W_poly.T) / 2.0
    tr_sorted = np.sort(transformed)
    lam_max_p, lam_min_plus_p, gamma_p = _spectral_summary(tr_sorted)
    return GossipMatrix(
        W=W_poly, gamma=gamma_p, lambda_max=lam_max_p, lambda_min_plus=lam_min_plus_p,
        effective_degree=degree, _poly=(gossip.W, degree, c2, c3, t_deg),
    )


def save_edgelist(graph, path):
    """Write the edge-list text format: header '<n> <edge count>', then 'k l' lines."""
    lines = [f"{graph.n} {len(graph.edges)}"]
    lines += [f"{k} {l}" for (k, l) in graph.edge_list]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_edgelist(path, kind="custom"):
    """Read the edge-list text format written by :func:`save_edgelist`."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise ValidationError(f"{path}: empty edge-list file")
    head = raw[0].split()
    if len(head) != 2:
        raise ValidationError(f"{path}: header must be '<n> <count>', got {raw[0]!r}")
    n, count = int(head[0]), int(head[1])
    edges = set()
    for idx, ln in enumerate(raw[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise ValidationError(f"{path}: line {idx}: expected 'k l', got {ln!r}")
        edges.add((int(parts[0]), int(parts[1])))
    if len(edges) != count:
        raise ValidationError(f"{path}: header declares {count} edges, found {len(edges)}")
    return Graph(n=n, edges=frozenset(edges), kind=kind)
