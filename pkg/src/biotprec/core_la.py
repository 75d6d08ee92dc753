"""Sparse and small dense linear algebra kernels.

Every assembled block is a canonical ``scipy.sparse.csr_matrix`` (sorted
column indices, duplicates summed).  Direct solves go through SuperLU or
LAPACK; the dense symmetric eigensolver is restricted to desk-scale
problems used by the analysis module.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SparseMatrix = sp.csr_matrix

DENSE_LIMIT = 4000


class DimensionError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    pass


class NotSymmetricError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


class DenseLimitError(ValueError):
    pass


def as_csr(A) -> sp.csr_matrix:
    """Return ``A`` as a canonical CSR matrix (sorted, duplicates summed)."""
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=float)
    else:
        A = sp.csr_matrix(np.atleast_2d(np.asarray(A, dtype=float)))
    A.sum_duplicates()
    A.sort_indices()
    return A


def coo_to_csr(rows, cols, vals, shape) -> sp.csr_matrix:
    """Finalize triplet assembly data; duplicate entries are summed."""
    A = sp.coo_matrix((np.asarray(vals, dtype=float).ravel(),
                       (np.asarray(rows).ravel(), np.asarray(cols).ravel())),
                      shape=shape)
    return as_csr(A)


def spmv(A, x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.shape[1]:
        raise DimensionError(f"spmv: matrix has {A.shape[1]} columns, vector has {x.shape[0]} entries")
    return A @ x


def diag_matrix(d) -> sp.csr_matrix:
    return as_csr(sp.diags(np.asarray(d, dtype=float)))


def sparse_triple_product(A, d_inv, B) -> sp.csr_matrix:
    """Compute ``A @ diag(d_inv) @ B`` as sorted CSR.

    Entries of ``d_inv`` whose column of ``A`` is structurally empty are
    never referenced.
    """
    d_inv = np.asarray(d_inv, dtype=float)
    if A.shape[1] != d_inv.shape[0] or B.shape[0] != d_inv.shape[0]:
        raise DimensionError(
            f"triple product: {A.shape} * diag({d_inv.shape[0]}) * {B.shape}")
    A = as_csr(A)
    scaled = A.multiply(d_inv[np.newaxis, :]) if A.nnz else A
    return as_csr(sp.csr_matrix(scaled) @ as_csr(B))


def is_symmetric(A, rtol: float = 1e-12) -> bool:
    if sp.issparse(A):
        diff = abs(A - A.T)
        scale = abs(A).max() if A.nnz else 0.0
        return diff.nnz == 0 or diff.max() <= rtol * max(scale, np.finfo(float).tiny)
    A = np.asarray(A)
    scale = np.max(np.abs(A)) if A.size else 0.0
    return np.max(np.abs(A - A.T), initial=0.0) <= rtol * max(scale, np.finfo(float).tiny)


class BlockOperator:
    """A k-by-k grid of optional sparse blocks with scalar scale factors.

    ``blocks[i][j]`` is ``None`` for a zero block.  The operator acts on
    vectors partitioned by ``col_sizes`` and returns vectors partitioned by
    ``row_sizes``.
    """

    def __init__(self, blocks, scales=None, row_sizes=None, col_sizes=None):
        k = len(blocks)
        if any(len(row) != len(blocks[0]) for row in blocks):
            raise DimensionError("ragged block grid")
        m = len(blocks[0])
        self.blocks = [[None if b is None else as_csr(b) for b in row] for row in blocks]
        self.scales = np.ones((k, m)) if scales is None else np.asarray(scales, dtype=float)
        rs = list(row_sizes) if row_sizes is not None else [None] * k
        cs = list(col_sizes) if col_sizes is not None else [None] * m
        for i in range(k):
            for j in range(m):
                b = self.blocks[i][j]
                if b is None:
                    continue
                if rs[i] is None:
                    rs[i] = b.shape[0]
                if cs[j] is None:
                    cs[j] = b.shape[1]
                if b.shape != (rs[i], cs[j]):
                    raise DimensionError(
                        f"block ({i},{j}) has shape {b.shape}, expected {(rs[i], cs[j])}")
        if any(s is None for s in rs + cs):
            raise DimensionError("partition size undetermined for an all-zero block row/column")
        self.row_sizes = [int(s) for s in rs]
        self.col_sizes = [int(s) for s in cs]
        self.row_offsets = np.concatenate([[0], np.cumsum(self.row_sizes)]).astype(int)
        self.col_offsets = np.concatenate([[0], np.cumsum(self.col_sizes)]).astype(int)

    @property
    def shape(self):
        return int(self.row_offsets[-1]), int(self.col_offsets[-1])

    @property
    def nblocks(self):
        return len(self.row_sizes)

    def block(self, i, j):
        """Scaled block ``(i, j)`` or ``None``."""
        b = self.blocks[i][j]
        if b is None:
            return None
        s = self.scales[i, j]
        return b if s == 1.0 else as_csr(s * b)

    def split(self, x, cols=True):
        off = self.col_offsets if cols else self.row_offsets
        return [x[off[i]:off[i + 1]] for i in range(len(off) - 1)]

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.shape[1]:
            raise DimensionError(f"BlockOperator expects {self.shape[1]} entries, got {x.shape[0]}")
        xs = self.split(x)
        y = np.zeros(self.shape[0])
        for i in range(self.nblocks):
            yi = y[self.row_offsets[i]:self.row_offsets[i + 1]]
            for j in range(len(self.col_sizes)):
                b = self.blocks[i][j]
                if b is not None:
                    yi += self.scales[i, j] * (b @ xs[j])
        return y

    __matmul__ = apply

    def matvec(self, x):
        return self.apply(x)

    def to_csr(self) -> sp.csr_matrix:
        grid = [[self.block(i, j) for j in range(len(self.col_sizes))]
                for i in range(self.nblocks)]
        # bmat needs at least one block per row/col to infer sizes
        for i in range(self.nblocks):
            for j in range(len(self.col_sizes)):
                if grid[i][j] is None and (i == j):
                    grid[i][j] = sp.csr_matrix((self.row_sizes[i], self.col_sizes[j]))
        return as_csr(sp.bmat(grid, format="csr"))

    def submatrix(self, rows, cols):
        """Block operator restricted to the given block rows/columns."""
        return BlockOperator([[self.blocks[i][j] for j in cols] for i in rows],
                             scales=self.scales[np.ix_(rows, cols)],
                             row_sizes=[self.row_sizes[i] for i in rows],
                             col_sizes=[self.col_sizes[j] for j in cols])


@dataclass
class Factorization:
    kind: str
    n: int
    _lu: object = field(repr=False, default=None)
    _dense: tuple | None = field(repr=False, default=None)
    _diag: np.ndarray | None = field(repr=False, default=None)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise DimensionError(f"factorization of order {self.n} applied to {b.shape[0]} entries")
        if self.kind == "sparse_lu":
            return self._lu.solve(b)
        if self.kind == "dense_lu":
            return sla.lu_solve(self._dense, b)
        if self.kind == "cholesky":
            return sla.cho_solve(self._dense, b)
        return b / self._diag if b.ndim == 1 else b / self._diag[:, None]


def factorize(A, kind: str = "sparse_lu") -> Factorization:
    """Factor a square matrix for repeated solves.

    ``kind`` is ``sparse_lu`` (SuperLU, COLAMD fill-reducing ordering),
    ``dense_lu``, ``cholesky`` or ``diagonal``.
    """
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"cannot factor non-square matrix {A.shape}")
    n = A.shape[0]
    if kind == "sparse_lu":
        A = sp.csc_matrix(A, dtype=float)
        try:
            lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc
        if not np.all(np.isfinite(lu.U.diagonal())) or np.any(lu.U.diagonal() == 0.0):
            raise SingularMatrixError("zero pivot in sparse LU")
        return Factorization(kind, n, _lu=lu)
    if kind == "diagonal":
        d = A.diagonal() if sp.issparse(A) else np.diag(np.asarray(A, dtype=float)).copy()
        if np.any(d == 0.0):
            raise SingularMatrixError("zero diagonal entry")
        return Factorization(kind, n, _diag=np.asarray(d, dtype=float))
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    if kind == "dense_lu":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(dense, check_finite=True)
        if np.any(np.diag(lu) == 0.0):
            raise SingularMatrixError("zero pivot in dense LU")
        return Factorization(kind, n, _dense=(lu, piv))
    if kind == "cholesky":
        try:
            c = sla.cho_factor(dense)
        except sla.LinAlgError as exc:
            raise SingularMatrixError(str(exc)) from exc
        return Factorization(kind, n, _dense=c)
    raise ValueError(f"unknown factorization kind {kind!r}")


def solve(F: Factorization, b):
    return F.solve(b)


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def dense_sym_eig(A, B=None, vectors: bool = False, dense_limit: int = DENSE_LIMIT):
    """Eigenvalues (ascending) of the symmetric pencil ``A v = lam B v``.

    Returns ``w`` or ``(w, V)`` with B-orthonormal columns in ``V``.
    """
    A = _dense(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"eigenproblem needs a square matrix, got {A.shape}")
    if n > dense_limit:
        raise DenseLimitError(f"order {n} exceeds dense limit {dense_limit}")
    if not is_symmetric(A):
        raise NotSymmetricError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    if B is None:
        res = sla.eigh(A, eigvals_only=not vectors)
        return res
    B = _dense(B)
    if B.shape != (n, n):
        raise DimensionError("pencil matrices differ in shape")
    if not is_symmetric(B):
        raise NotSymmetricError("pencil matrix is not symmetric")
    B = 0.5 * (B + B.T)
    try:
        C = sla.cholesky(B, lower=True)
    except sla.LinAlgError as exc:
        raise NotPositiveDefiniteError("pencil matrix is not positive definite") from exc
    # reduce to standard form C^{-1} A C^{-T}
    X = sla.solve_triangular(C, A, lower=True)
    S = sla.solve_triangular(C, X.T, lower=True)
    S = 0.5 * (S + S.T)
    if not vectors:
        return sla.eigh(S, eigvals_only=True)
    w, Y = sla.eigh(S)
    V = sla.solve_triangular(C.T, Y, lower=False)
    return w, V


def write_matrix_market(path, A, symmetric: bool = False, comment: str = ""):
    """Write ``A`` in Matrix Market coordinate format (1-based indices)."""
    A = sp.coo_matrix(A)
    scipy.io.mmwrite(str(path), A, comment=comment,
                     field="real", symmetry="symmetric" if symmetric else "general")
    return Path(path)


def read_matrix_market(path) -> sp.csr_matrix:
    return as_csr(scipy.io.mmread(str(path)))
