"""Three-field Biot systems: full, diagonal-bubble and bubble-eliminated."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .core_la import BlockOperator, as_csr, diag_matrix, sparse_triple_product

FULL, DIAG, ELIM = "full", "diag", "elim"


@dataclass(frozen=True)
class PhysicalParams:
    mu: float
    lam: float
    alpha: float = 1.0
    M: float = 1e6
    mu_f: float = 1.0
    k: object = 1e-6  # scalar or per-element array
    rho_g: tuple | None = None
    rho_f_g: tuple | None = None
    nu: float | None = None
    E: float | None = None

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if not (0 < self.alpha <= 1):
            raise ValueError("Biot-Willis coefficient must lie in (0, 1]")
        if self.M <= 0 or self.mu_f <= 0:
            raise ValueError("M and mu_f must be positive")
        if np.any(np.asarray(self.k) <= 0):
            raise ValueError("permeability must be positive")

    @classmethod
    def from_E_nu(cls, E=1e4, nu=0.0, standard_shear=False, **kw):
        """Lame parameters from Young's modulus and Poisson ratio.

        The default shear modulus is E / (1 + 2 nu), the form used for the
        reproduced benchmark tables; ``standard_shear`` selects E / (2 (1 + nu)).
        """
        if not (-1.0 < nu < 0.5):
            raise ValueError("Poisson ratio must lie in (-1, 0.5)")
        lam = E * nu / ((1 - 2 * nu) * (1 + nu))
        mu = E / (2 * (1 + nu)) if standard_shear else E / (1 + 2 * nu)
        return cls(mu=mu, lam=lam, nu=nu, E=E, **kw)

    def with_k(self, k):
        return replace(self, k=k)


@dataclass(frozen=True)
class DerivedParams:
    zeta: float
    c_p: float


def derived_params(p: PhysicalParams, d: int) -> DerivedParams:
    if p.nu is not None and p.nu >= 0.5:
        raise ValueError("nu = 0.5 gives infinite lambda")
    zeta = float(np.sqrt(p.lam + 2.0 * p.mu / d))
    c_p = 1.0 / (p.alpha ** 2 / zeta ** 2 + 1.0 / p.M)
    return DerivedParams(zeta, c_p)


@dataclass
class BiotSystem:
    """One linear system of a backward-Euler step.

    ``op`` block rows: full/diag -> (u_b, u_l, p, w); elim -> (u_l, p, w).
    """

    variant: str
    op: BlockOperator
    blocks: object
    params: PhysicalParams
    tau: float
    D_bb: np.ndarray | None = None
    rhs: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self):
        return self.blocks.mesh.dim

    @property
    def derived(self):
        return derived_params(self.params, self.dim)

    @property
    def sizes(self):
        return list(self.op.row_sizes)

    @property
    def n(self):
        return self.op.shape[0]

    def field_slices(self):
        """Slices of the (u, p, w) fields in the monolithic vector."""
        off = self.op.row_offsets
        if self.variant == ELIM:
            return slice(off[0], off[1]), slice(off[1], off[2]), slice(off[2], off[3])
        return slice(off[0], off[2]), slice(off[2], off[3]), slice(off[3], off[4])

    def matrix(self):
        return self.op.to_csr()

    # named blocks -------------------------------------------------------
    @property
    def A_u(self):
        """Displacement block: A_u (full), A_u^D (diag) or A_u^E (elim)."""
        if self.variant == ELIM:
            return self.op.block(0, 0)
        return as_csr(sp.bmat([[self.op.block(0, 0), self.op.block(0, 1)],
                               [self.op.block(1, 0), self.op.block(1, 1)]]))

    @property
    def B_u(self):
        """Divergence coupling: B_u = [B_b, B_l] or B_u^E = B_l - B_b D_bb^-1 A_bl."""
        b = self.blocks
        if self.variant == ELIM:
            return as_csr(b.B_l - sparse_triple_product(b.B_b, 1.0 / self.D_bb, b.A_bl))
        return b.B_u

    @property
    def pressure_block(self):
        i = 1 if self.variant == ELIM else 2
        return self.op.block(i, i)


def _full_grid(b, A11, alpha, M, tau):
    grid = [[A11, b.A_bl, b.B_b.T, None],
            [b.A_bl.T, b.A_ll, b.B_l.T, None],
            [b.B_b, b.B_l, b.M_p, b.B_w],
            [None, None, b.B_w.T, b.M_w]]
    scales = np.array([[1, 1, alpha, 1],
                       [1, 1, alpha, 1],
                       [-alpha, -alpha, 1.0 / M, -tau],
                       [1, 1, tau, tau]], dtype=float)
    return grid, scales


def build_full_system(blocks, params: PhysicalParams, tau: float) -> BiotSystem:
    if tau <= 0:
        raise ValueError("time step must be positive")
    grid, scales = _full_grid(blocks, blocks.A_bb, params.alpha, params.M, tau)
    op = BlockOperator(grid, scales)
    return BiotSystem(FULL, op, blocks, params, tau)


def bubble_diagonal(A_bb, d):
    diag = A_bb.diagonal()
    if np.any(diag <= 0):
        raise ValueError("non-positive diagonal entry in A_bb (degenerate mesh?)")
    return (d + 1) * diag


def build_diag_bubble_system(full: BiotSystem) -> BiotSystem:
    """Replace A_bb by D_bb = (d+1) diag(A_bb)."""
    b = full.blocks
    D_bb = bubble_diagonal(b.A_bb, b.mesh.dim)
    grid, scales = _full_grid(b, diag_matrix(D_bb), full.params.alpha, full.params.M, full.tau)
    op = BlockOperator(grid, scales)
    return BiotSystem(DIAG, op, b, full.params, full.tau, D_bb=D_bb)


def eliminate_bubbles(diag_sys: BiotSystem) -> BiotSystem:
    """Statically condense the diagonal bubble block."""
    if diag_sys.variant != DIAG:
        raise ValueError("bubble elimination needs the diagonal-bubble system")
    b = diag_sys.blocks
    a, M, tau = diag_sys.params.alpha, diag_sys.params.M, diag_sys.tau
    Dinv = 1.0 / diag_sys.D_bb
    A_uE = as_csr(b.A_ll - sparse_triple_product(b.A_bl.T, Dinv, b.A_bl))
    B_uE = as_csr(b.B_l - sparse_triple_product(b.B_b, Dinv, b.A_bl))
    A_pE = as_csr(b.M_p / M + a * a * sparse_triple_product(b.B_b, Dinv, b.B_b.T))
    grid = [[A_uE, B_uE.T, None],
            [B_uE, A_pE, b.B_w],
            [None, b.B_w.T, b.M_w]]
    scales = np.array([[1, a, 1], [-a, 1, -tau], [1, tau, tau]], dtype=float)
    op = BlockOperator(grid, scales)
    return BiotSystem(ELIM, op, b, diag_sys.params, tau, D_bb=diag_sys.D_bb)


def build_system(blocks, params, tau, variant=FULL) -> BiotSystem:
    full = build_full_system(blocks, params, tau)
    if variant == FULL:
        return full
    diag = build_diag_bubble_system(full)
    if variant == DIAG:
        return diag
    if variant == ELIM:
        return eliminate_bubbles(diag)
    raise ValueError(f"unknown variant {variant!r}")


def backward_euler_rhs(system: BiotSystem, u_prev=None, p_prev=None, source=None):
    """Right-hand side of one backward-Euler step.

    ``u_prev`` is the full enriched displacement ``[u_b, u_l]``; ``source``
    is the P0 load (f, q) and defaults to the assembled one.
    """
    b = system.blocks
    prm = system.params
    tau = system.tau
    nb, nl, npr, nw = b.sizes
    g_p = b.g_p if source is None else source
    r_p = tau * g_p
    if p_prev is not None:
        r_p = r_p + (b.M_p @ p_prev) / prm.M
    if u_prev is not None:
        r_p = r_p - prm.alpha * (b.B_u @ u_prev)
    r_b, r_l, r_w = b.f_b.copy(), b.f_l.copy(), tau * b.g_w
    if system.variant != ELIM:
        return np.concatenate([r_b, r_l, r_p, r_w])
    Dinv = 1.0 / system.D_bb
    r_lE = r_l - b.A_bl.T @ (Dinv * r_b)
    r_pE = r_p + prm.alpha * (b.B_b @ (Dinv * r_b))
    return np.concatenate([r_lE, r_pE, r_w])


def recover_bubbles(system: BiotSystem, u_l, p):
    """Bubble coefficients of an eliminated-system solution."""
    b = system.blocks
    return (b.f_b - b.A_bl @ u_l - system.params.alpha * (b.B_b.T @ p)) / system.D_bb


def full_state(system: BiotSystem, x):
    """Split a solution into (u = [u_b, u_l], p, w)."""
    if system.variant == ELIM:
        su, sp_, sw = system.field_slices()
        u_l, p, w = x[su], x[sp_], x[sw]
        return np.concatenate([recover_bubbles(system, u_l, p), u_l]), p, w
    su, sp_, sw = system.field_slices()
    return x[su], x[sp_], x[sw]
