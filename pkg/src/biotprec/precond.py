"""Block diagonal and block triangular preconditioners for the Biot systems.

Each preconditioner combines three sub-solvers (displacement, pressure,
flux) with the off-diagonal coupling blocks of the system it is applied to.
Exact variants use direct factorizations; inexact ones use tolerance-bounded
inner GMRES with AMG (displacement, eliminated pressure) or an
auxiliary-Schur preconditioner (flux).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import amg as amg_mod
from .biot import ELIM, BiotSystem
from .core_la import DimensionError, as_csr, factorize, sparse_triple_product
from .krylov import gmres_inner

DIAGONAL, LOWER, UPPER = "diagonal", "lower", "upper"
DIRECT, DIAGONAL_INVERSE, AMG_VCYCLE, INNER_KRYLOV = "direct", "diagonal-inverse", "amg", "krylov"

PRECOND_IDS = {
    "bd": (DIAGONAL, False), "bl": (LOWER, False), "bu": (UPPER, False),
    "bde": (DIAGONAL, True), "ble": (LOWER, True), "bue": (UPPER, True),
}


@dataclass
class WeightedBlocks:
    """Diagonal blocks of the norm-equivalent (Riesz) operator."""

    A_u: sp.csr_matrix
    W_p: sp.csr_matrix
    W_w: sp.csr_matrix
    A_w: sp.csr_matrix
    variant: str
    u_node_sizes: np.ndarray
    p_diagonal: bool


def build_weighted_blocks(system: BiotSystem) -> WeightedBlocks:
    b = system.blocks
    prm = system.params
    c_p = system.derived.c_p
    tau = system.tau
    Mp_diag = b.M_p.diagonal()
    A_w = sparse_triple_product(b.B_w.T, 1.0 / Mp_diag, b.B_w)
    W_w = as_csr(tau * b.M_w + tau * tau * c_p * A_w)
    W_p = as_csr(b.M_p / c_p)
    nb = b.sizes[0]
    if system.variant == ELIM:
        W_p = as_csr(W_p + prm.alpha ** 2 * sparse_triple_product(b.B_b, 1.0 / system.D_bb, b.B_b.T))
        sizes = b.l_node_sizes
        p_diag = False
    else:
        sizes = np.concatenate([np.ones(nb, dtype=np.int64), b.l_node_sizes])
        p_diag = True
    return WeightedBlocks(system.A_u, W_p, W_w, A_w, system.variant, sizes, p_diag)


class LumpedSchurFlux:
    """Approximate inverse of ``tau M_w + tau^2 c_p B_w^T M_p^-1 B_w``.

    ``M_w`` is replaced by its diagonal ``D_w`` and the Woodbury identity
    moves the grad-div part onto the P0 matrix
    ``S = M_p / (tau^2 c_p) + B_w (tau D_w)^-1 B_w^T``, which is solved by
    AMG-preconditioned GMRES to ``schur_tol`` (or directly).  Where the
    grad-div term dominates, the Woodbury subtraction amplifies the error of
    the S solve, so a single V-cycle is not enough once k is large.
    """

    def __init__(self, M_w, B_w, M_p, tau, c_p, exact_schur=False, schur_tol=1e-6):
        self.dinv = 1.0 / (tau * M_w.diagonal())
        self.B_w = as_csr(B_w)
        S = as_csr(M_p / (tau * tau * c_p) + sparse_triple_product(B_w, self.dinv, B_w.T))
        if exact_schur:
            self._s = factorize(S, "sparse_lu").solve
        else:
            H = amg_mod.amg_setup(S, 1)
            self._s = lambda v: gmres_inner(S, v, H, tol=schur_tol, max_it=200)

    def apply(self, r):
        y = self.dinv * r
        return y - self.dinv * (self.B_w.T @ self._s(self.B_w @ y))

    __call__ = apply


@dataclass
class SubSolver:
    """Approximate inverse of one diagonal block."""

    kind: str
    block: sp.csr_matrix
    tol: float = 1e-3
    max_it: int = 200
    inner: object = None
    failures: int = field(default=0, repr=False)
    calls: int = field(default=0, repr=False)
    _apply: object = field(default=None, repr=False)

    def __post_init__(self):
        A = self.block
        if self.kind == DIRECT:
            self._apply = factorize(A, "sparse_lu").solve
        elif self.kind == DIAGONAL_INVERSE:
            off = A - sp.diags(A.diagonal())
            if as_csr(off).count_nonzero():
                raise ValueError("diagonal inverse requested for a non-diagonal block")
            self._apply = factorize(A, "diagonal").solve
        elif self.kind == AMG_VCYCLE:
            if self.inner is None:
                self.inner = amg_mod.amg_setup(A)
            self._apply = self.inner.apply
        elif self.kind == INNER_KRYLOV:
            if self.inner is None:
                raise ValueError("inner Krylov solver needs an inner preconditioner")
        else:
            raise ValueError(f"unknown sub-solver kind {self.kind!r}")

    def apply(self, r):
        self.calls += 1
        if self.kind != INNER_KRYLOV:
            return self._apply(r)
        M = self.inner.apply if hasattr(self.inner, "apply") else self.inner
        x, hist, ok = gmres_inner(self.block, r, M, tol=self.tol, max_it=self.max_it,
                                  return_info=True)
        if not ok:
            self.failures += 1
        return x

    __call__ = apply


def default_subsolvers(W: WeightedBlocks, system: BiotSystem, inexact: bool,
                       inner_tol: float = 1e-3, theta: float = 0.08):
    """Sub-solvers (S_u, S_p, S_w) for the exact or inexact preconditioners."""
    if not inexact:
        S_u = SubSolver(DIRECT, W.A_u)
        S_p = SubSolver(DIAGONAL_INVERSE if W.p_diagonal else DIRECT, W.W_p)
        S_w = SubSolver(DIRECT, W.W_w)
        return S_u, S_p, S_w
    b = system.blocks
    H_u = amg_mod.amg_setup(W.A_u, node_sizes=W.u_node_sizes, theta=theta)
    S_u = SubSolver(INNER_KRYLOV, W.A_u, tol=inner_tol, inner=H_u)
    if W.p_diagonal:
        S_p = SubSolver(DIAGONAL_INVERSE, W.W_p)
    else:
        S_p = SubSolver(INNER_KRYLOV, W.W_p, tol=inner_tol, inner=amg_mod.amg_setup(W.W_p, 1, theta=theta))
    flux = LumpedSchurFlux(b.M_w, b.B_w, b.M_p, system.tau, system.derived.c_p)
    S_w = SubSolver(INNER_KRYLOV, W.W_w, tol=inner_tol, inner=flux)
    return S_u, S_p, S_w


def _couplings(system: BiotSystem):
    """Field-level off-diagonal blocks (A_up, A_pu, A_pw, A_wp) of the system."""
    op = system.op
    if system.variant == ELIM:
        return op.block(0, 1), op.block(1, 0), op.block(1, 2), op.block(2, 1)
    A_up = as_csr(sp.vstack([op.block(0, 2), op.block(1, 2)]))
    A_pu = as_csr(sp.hstack([op.block(2, 0), op.block(2, 1)]))
    return A_up, A_pu, op.block(2, 3), op.block(3, 2)


class BlockPreconditioner:
    """Block diagonal, lower or upper triangular preconditioner.

    ``apply`` performs block substitution:

    * lower:  z_u = S_u r_u,  z_p = S_p (r_p - A_pu z_u),  z_w = S_w (r_w - A_wp z_p)
    * upper:  z_w = S_w r_w,  z_p = S_p (r_p - A_pw z_w),  z_u = S_u (r_u - A_up z_p)
    * diagonal: independent solves.
    """

    def __init__(self, family, system: BiotSystem, subsolvers, weighted=None, name=""):
        if family not in (DIAGONAL, LOWER, UPPER):
            raise ValueError(f"unknown preconditioner family {family!r}")
        self.family = family
        self.variant = system.variant
        self.S_u, self.S_p, self.S_w = subsolvers
        self.A_up, self.A_pu, self.A_pw, self.A_wp = _couplings(system)
        self.slices = system.field_slices()
        self.n = system.n
        self.weighted = weighted
        self.name = name

    @property
    def shape(self):
        return self.n, self.n

    @property
    def inner_failures(self):
        return sum(s.failures for s in (self.S_u, self.S_p, self.S_w))

    def apply(self, r):
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.n:
            raise DimensionError(f"preconditioner of order {self.n} applied to {r.shape[0]} entries")
        su, sp_, sw = self.slices
        r_u, r_p, r_w = r[su], r[sp_], r[sw]
        if self.family == DIAGONAL:
            z_u, z_p, z_w = self.S_u(r_u), self.S_p(r_p), self.S_w(r_w)
        elif self.family == LOWER:
            z_u = self.S_u(r_u)
            z_p = self.S_p(r_p - self.A_pu @ z_u)
            z_w = self.S_w(r_w - self.A_wp @ z_p)
        else:
            z_w = self.S_w(r_w)
            z_p = self.S_p(r_p - self.A_pw @ z_w)
            z_u = self.S_u(r_u - self.A_up @ z_p)
        return np.concatenate([z_u, z_p, z_w])

    __call__ = apply
    matvec = apply


def make_preconditioner(family, system: BiotSystem, subsolvers=None, inexact=False,
                        inner_tol=1e-3, name=""):
    """Assemble a block preconditioner for ``system``.

    Without explicit ``subsolvers`` the exact (direct) or inexact (inner
    GMRES + AMG) defaults are used.
    """
    W = build_weighted_blocks(system)
    if subsolvers is None:
        subsolvers = default_subsolvers(W, system, inexact, inner_tol)
    return BlockPreconditioner(family, system, subsolvers, W, name)


def preconditioner_from_id(pid: str, system: BiotSystem, inexact=False, inner_tol=1e-3):
    """CLI ids: bd/bl/bu for the full (or diagonal-bubble) system, bde/ble/bue for the eliminated one."""
    if pid not in PRECOND_IDS:
        raise ValueError(f"unknown preconditioner id {pid!r}")
    family, elim = PRECOND_IDS[pid]
    if elim != (system.variant == ELIM):
        raise ValueError(f"preconditioner {pid!r} does not match the {system.variant} system")
    return make_preconditioner(family, system, inexact=inexact, inner_tol=inner_tol,
                               name=pid + ("-hat" if inexact else ""))
