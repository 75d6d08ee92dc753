"""Unsmoothed-aggregation AMG with a V(1,1) cycle.

Aggregation works on *nodes*: groups of dofs that are coarsened together
(the d components of a vertex, or a scalar dof).  Nodes are only merged with
nodes of the same size, so a displacement space with scalar facet bubbles
and vector vertex dofs can be handled in one hierarchy.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

from .core_la import DimensionError, as_csr, factorize


@numba.njit(cache=True)
def _sgs_sweep(indptr, indices, data, diag, x, b, forward):
    n = x.shape[0]
    if forward:
        rng = range(n)
    else:
        rng = range(n - 1, -1, -1)
    for i in rng:
        s = b[i]
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j != i:
                s -= data[jj] * x[j]
        x[i] = s / diag[i]


@numba.njit(cache=True)
def _aggregate(indptr, indices, kind):
    """Greedy three-pass aggregation on a symmetric strength graph.

    Nodes without strong neighbours are collected into one aggregate per kind.
    """
    n = indptr.shape[0] - 1
    agg = -np.ones(n, dtype=np.int64)
    na = 0
    # pass 1: seed aggregates whose whole neighbourhood is free
    for i in range(n):
        if agg[i] >= 0 or indptr[i + 1] == indptr[i]:
            continue
        free = True
        for jj in range(indptr[i], indptr[i + 1]):
            if agg[indices[jj]] >= 0:
                free = False
                break
        if free:
            agg[i] = na
            for jj in range(indptr[i], indptr[i + 1]):
                agg[indices[jj]] = na
            na += 1
    # pass 2: attach leftovers to a neighbouring aggregate
    pass1 = agg.copy()
    for i in range(n):
        if agg[i] >= 0:
            continue
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if pass1[j] >= 0:
                agg[i] = pass1[j]
                break
    # pass 3: new aggregates from what remains
    for i in range(n):
        if agg[i] >= 0 or indptr[i + 1] == indptr[i]:
            continue
        agg[i] = na
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if agg[j] < 0:
                agg[j] = na
        na += 1
    # isolated nodes
    kinds = np.unique(kind)
    for k in kinds:
        first = -1
        for i in range(n):
            if agg[i] < 0 and kind[i] == k:
                if first < 0:
                    first = na
                    na += 1
                agg[i] = first
    return agg, na


@dataclass
class AmgLevel:
    A: sp.csr_matrix
    diag: np.ndarray
    P: sp.csr_matrix | None = None
    node_of: np.ndarray | None = field(default=None, repr=False)
    aggregates: np.ndarray | None = field(default=None, repr=False)


@dataclass
class AmgHierarchy:
    levels: list
    coarse: object
    smoother: str = "sgs"
    omega: float = 2.0 / 3.0
    block_size: int = 1

    @property
    def n_levels(self):
        return len(self.levels)

    @property
    def operator_complexity(self):
        return sum(L.A.nnz for L in self.levels) / self.levels[0].A.nnz

    def __call__(self, r):
        return vcycle(self, r)

    apply = __call__


def _node_layout(n, block_size, node_sizes):
    """Map dofs to nodes; ``node_sizes`` lists the dof count of each consecutive node."""
    if node_sizes is None:
        if n % block_size:
            raise DimensionError(f"size {n} not divisible by block size {block_size}")
        node_sizes = np.full(n // block_size, block_size, dtype=np.int64)
    node_sizes = np.asarray(node_sizes, dtype=np.int64)
    if node_sizes.sum() != n:
        raise DimensionError("node sizes do not add up to the matrix order")
    node_of = np.repeat(np.arange(node_sizes.size), node_sizes)
    return node_of, node_sizes


def _strength_graph(A, node_of, node_sizes, theta):
    nn = node_sizes.size
    C = sp.coo_matrix(A)
    S = sp.csr_matrix((C.data ** 2, (node_of[C.row], node_of[C.col])), shape=(nn, nn))
    S.sum_duplicates()
    S.data = np.sqrt(S.data)
    d = S.diagonal()
    C = S.tocoo()
    keep = (C.row != C.col) & (node_sizes[C.row] == node_sizes[C.col])
    keep &= C.data >= theta * np.sqrt(np.abs(d[C.row] * d[C.col]))
    G = sp.csr_matrix((np.ones(keep.sum()), (C.row[keep], C.col[keep])), shape=(nn, nn))
    G = G + G.T  # symmetrize
    G.sort_indices()
    return G


def _prolongator(node_of, node_sizes, agg, n_agg):
    """Piecewise-constant P, one column per (aggregate, component)."""
    agg_size = np.zeros(n_agg, dtype=np.int64)
    agg_size[agg] = node_sizes  # all members share a size
    coarse_off = np.concatenate([[0], np.cumsum(agg_size)])
    n = node_of.size
    comp = np.arange(n) - np.concatenate([[0], np.cumsum(node_sizes)])[node_of]
    cols = coarse_off[agg[node_of]] + comp
    P = sp.csr_matrix((np.ones(n), (np.arange(n), cols)), shape=(n, int(coarse_off[-1])))
    return P, agg_size


def amg_setup(A, block_size: int = 1, node_sizes=None, theta: float = 0.08,
              max_coarse: int = 200, max_levels: int = 25, smoother: str = "sgs",
              omega: float = 2.0 / 3.0) -> AmgHierarchy:
    """Build an unsmoothed-aggregation hierarchy for an SPD matrix.

    Parameters
    ----------
    A : sparse matrix
    block_size : int
        Dofs per node when ``node_sizes`` is not given (``d`` for interleaved
        vector fields).
    node_sizes : array_like, optional
        Dof count of each consecutive node; overrides ``block_size``.
    theta : float
        Strength threshold on node-block Frobenius norms.
    smoother : {"sgs", "jacobi"}
    """
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"AMG needs a square matrix, got {A.shape}")
    if smoother not in ("sgs", "jacobi"):
        raise ValueError(f"unknown smoother {smoother!r}")
    A = as_csr(A)
    node_of, sizes = _node_layout(A.shape[0], block_size, node_sizes)
    levels = []
    while True:
        diag = A.diagonal().copy()
        if np.any(diag <= 0):
            raise ValueError("AMG needs a positive diagonal")
        level = AmgLevel(A, diag, node_of=node_of)
        levels.append(level)
        n = A.shape[0]
        if n <= max_coarse or len(levels) >= max_levels:
            break
        G = _strength_graph(A, node_of, sizes, theta)
        agg, n_agg = _aggregate(G.indptr.astype(np.int64), G.indices.astype(np.int64), sizes)
        P, agg_sizes = _prolongator(node_of, sizes, agg, n_agg)
        if P.shape[1] >= 0.95 * n:  # coarsening stalled
            break
        level.P, level.aggregates = P, agg
        A = as_csr(P.T @ A @ P)
        sizes = agg_sizes
        node_of = np.repeat(np.arange(sizes.size), sizes)
    coarse = factorize(levels[-1].A, "dense_lu" if levels[-1].A.shape[0] <= 2000 else "sparse_lu")
    return AmgHierarchy(levels, coarse, smoother, omega,
                        block_size if node_sizes is None else 0)


def _smooth(H, L, x, b):
    if H.smoother == "sgs":
        # a forward+backward sweep is self-adjoint, so pre and post smoothing match
        A = L.A
        _sgs_sweep(A.indptr, A.indices, A.data, L.diag, x, b, True)
        _sgs_sweep(A.indptr, A.indices, A.data, L.diag, x, b, False)
    else:
        x += H.omega * (b - L.A @ x) / L.diag


def _cycle(H, lev, b):
    if lev == H.n_levels - 1:
        return H.coarse.solve(b)
    L = H.levels[lev]
    x = np.zeros_like(b)
    _smooth(H, L, x, b)
    rc = L.P.T @ (b - L.A @ x)
    x += L.P @ _cycle(H, lev + 1, rc)
    _smooth(H, L, x, b)
    return x


def vcycle(H: AmgHierarchy, r):
    """One V(1,1) cycle from a zero initial guess; a linear, symmetric map of ``r``."""
    r = np.ascontiguousarray(r, dtype=float)
    if r.shape[0] != H.levels[0].A.shape[0]:
        raise DimensionError("residual does not match the hierarchy")
    return _cycle(H, 0, r)
