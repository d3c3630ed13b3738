"""Communication graphs and doubly stochastic mixing matrices."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

STOCHASTIC_TOL = 1e-12


class GraphError(ValueError):
    """Raised for malformed or disconnected communication graphs."""


@dataclass(frozen=True)
class NetworkTopology:
    """A fixed undirected graph together with its mixing matrix.

    Attributes
    ----------
    adjacency : ndarray of bool, shape (n, n)
        Symmetric adjacency with a zero diagonal.
    W : ndarray, shape (n, n)
        Doubly stochastic weights supported on the graph (plus diagonal).
    sigma_W : float
        Spectral norm of ``W - 11^T/n``.
    """

    adjacency: np.ndarray
    W: np.ndarray
    sigma_W: float

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @classmethod
    def from_weights(cls, adjacency, W) -> "NetworkTopology":
        adjacency = _check_adjacency(adjacency)
        W = np.asarray(W, dtype=float)
        off = ~adjacency & ~np.eye(len(W), dtype=bool)
        if np.any(W[off] != 0.0):
            raise GraphError("W has weight outside the graph support")
        return cls(adjacency, W, mixing_rate(W))


def _check_adjacency(adjacency) -> np.ndarray:
    adj = np.asarray(adjacency).astype(bool)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise GraphError(f"adjacency must be square, got shape {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise GraphError("adjacency must be symmetric")
    if np.any(np.diag(adj)):
        raise GraphError("adjacency must have a zero diagonal")
    return adj


def is_connected(adjacency) -> bool:
    """Breadth-first search from node 0."""
    adj = np.asarray(adjacency).astype(bool)
    n = adj.shape[0]
    if n == 0:
        return False
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(adj[i] & ~seen):
            seen[j] = True
            queue.append(j)
    return bool(seen.all())


def random_connected_graph(n: int, edge_prob: float, seed) -> np.ndarray:
    """Random connected graph: a random spanning tree plus Bernoulli extra edges.

    Each node in a random order is attached to a uniformly chosen node that
    precedes it, which yields a spanning tree. Every remaining pair is then
    joined with probability `edge_prob`.
    """
    if n < 1:
        raise GraphError("n must be positive")
    if not 0.0 < edge_prob <= 1.0:
        raise GraphError("edge_prob must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    adj = np.zeros((n, n), dtype=bool)
    order = rng.permutation(n)
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        adj[order[k], parent] = adj[parent, order[k]] = True
    iu, ju = np.triu_indices(n, k=1)
    extra = rng.random(iu.size) < edge_prob
    adj[iu[extra], ju[extra]] = True
    adj[ju[extra], iu[extra]] = True
    return adj


def cycle_graph(n: int) -> np.ndarray:
    if n < 3:
        raise GraphError(f"a cycle needs at least 3 nodes, got {n}")
    adj = np.zeros((n, n), dtype=bool)
    idx = np.arange(n)
    adj[idx, (idx + 1) % n] = True
    adj[(idx + 1) % n, idx] = True
    return adj


def metropolis_weights(adjacency) -> np.ndarray:
    """Metropolis-Hastings weights ``1 / (1 + max(deg_i, deg_j))`` on edges."""
    adj = _check_adjacency(adjacency)
    if not is_connected(adj):
        raise GraphError("metropolis_weights requires a connected graph")
    deg = adj.sum(axis=1)
    W = np.where(adj, 1.0 / (1.0 + np.maximum.outer(deg, deg)), 0.0)
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return W


def sinkhorn_balance(M, tol: float = STOCHASTIC_TOL, max_iter: int = 10_000) -> np.ndarray:
    """Alternate row and column normalisation until both sums are within `tol` of one.

    Parameters
    ----------
    M : array_like, shape (n, n)
        Nonnegative matrix; every row and column needs a positive entry.
    tol : float
        Stop once the largest row or column sum deviation drops below this.
    max_iter : int
        Number of row/column sweeps before giving up.

    Returns
    -------
    W : ndarray
        A doubly stochastic matrix with the support of `M`. Symmetric input
        gives symmetric output.

    Raises
    ------
    ValueError
        On negative entries, an empty row/column, or no convergence.
    """
    W = np.array(M, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("sinkhorn_balance needs a square matrix")
    if np.any(W < 0):
        raise ValueError("sinkhorn_balance needs a nonnegative matrix")
    if np.any(W.sum(axis=1) <= 0) or np.any(W.sum(axis=0) <= 0):
        raise ValueError("every row and column needs a positive entry")
    symmetric = np.array_equal(W, W.T)

    def deviation(X):
        return max(np.abs(X.sum(axis=1) - 1).max(), np.abs(X.sum(axis=0) - 1).max())

    for _ in range(max_iter):
        if deviation(W) < tol:
            return W
        W /= W.sum(axis=1, keepdims=True)
        W /= W.sum(axis=0, keepdims=True)
        if symmetric:
            W = 0.5 * (W + W.T)
    if deviation(W) < tol:
        return W
    raise ValueError(f"Sinkhorn balancing did not reach tol={tol} in {max_iter} sweeps")


def random_mixing_matrix(adjacency, seed) -> np.ndarray:
    """Sinkhorn-balanced symmetric random weights on the graph and its diagonal."""
    adj = _check_adjacency(adjacency)
    if not is_connected(adj):
        raise GraphError("random_mixing_matrix requires a connected graph")
    rng = np.random.default_rng(seed)
    n = adj.shape[0]
    raw = rng.uniform(0.0, 1.0, size=(n, n))
    raw = np.triu(raw) + np.triu(raw, 1).T
    support = adj | np.eye(n, dtype=bool)
    # keep weights away from zero so the support is exactly the graph
    return sinkhorn_balance(np.where(support, 0.05 + raw, 0.0))


def mixing_rate(W) -> float:
    """sigma_W = ||W - 11^T/n||_2 for a doubly stochastic W."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if (np.abs(W.sum(axis=1) - 1).max() > 1e-9) or (np.abs(W.sum(axis=0) - 1).max() > 1e-9):
        raise ValueError("mixing_rate needs a doubly stochastic W")
    D = W - np.full((n, n), 1.0 / n)
    if n <= 64:
        return float(np.linalg.svd(D, compute_uv=False)[0])
    return _power_norm(D)


def _power_norm(D: np.ndarray, iters: int = 5000, tol: float = 1e-13) -> float:
    v = np.random.default_rng(0).standard_normal(D.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        u = D.T @ (D @ v)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        v = u / nu
        if abs(nu - est) <= tol * nu:
            break
        est = nu
    return float(np.sqrt(nu))


def build_topology(adjacency, weights: str = "metropolis", seed=None) -> NetworkTopology:
    """Topology from an adjacency and a weight rule (``metropolis`` or ``random``)."""
    if weights == "metropolis":
        W = metropolis_weights(adjacency)
    elif weights == "random":
        W = random_mixing_matrix(adjacency, seed)
    else:
        raise ValueError(f"unknown weight rule {weights!r}")
    return NetworkTopology.from_weights(adjacency, W)
