"""Dense, desk-scale checks of stability constants and spectral bounds.

All quantities are extreme (generalized) eigenvalues computed with
:func:`core_la.dense_sym_eig`, so every routine is limited to systems of at
most ``DENSE_LIMIT`` unknowns.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .biot import DIAG, ELIM, BiotSystem, bubble_diagonal, eliminate_bubbles
from .core_la import DENSE_LIMIT, DenseLimitError, as_csr, dense_sym_eig, sparse_triple_product
from .krylov import fgmres
from .precond import build_weighted_blocks

ZERO_SV_CUTOFF = 1e-10


def _dense(A):
    if sp.issparse(A):
        return A.toarray()
    if hasattr(A, "to_csr"):
        return A.to_csr().toarray()
    return np.asarray(A, dtype=float)


def _sym(X):
    return 0.5 * (X + X.T)


def _check_size(n, limit=DENSE_LIMIT):
    if n > limit:
        raise DenseLimitError(f"order {n} exceeds dense limit {limit}")


@dataclass
class ConstantsReport:
    gamma: float = np.nan
    varsigma: float = np.nan
    lam_min: float = np.nan
    lam_max: float = np.nan
    Sigma: float = np.nan
    Upsilon: float = np.nan
    params: dict = field(default_factory=dict)

    def as_row(self):
        row = {"kind": "analysis"}
        row.update(self.params)
        for k in ("gamma", "varsigma", "lam_min", "lam_max", "Sigma", "Upsilon"):
            row[k] = f"{getattr(self, k):.6e}"
        return row


# ---------------------------------------------------------------------------
# norm matrices

def _w_block(blocks, tau, c_p):
    A_w = sparse_triple_product(blocks.B_w.T, 1.0 / blocks.M_p.diagonal(), blocks.B_w)
    return as_csr(tau * blocks.M_w + tau * tau * c_p * A_w)


def norm_matrix(system: BiotSystem, which: str = "D") -> sp.csr_matrix:
    """Weighted block-diagonal SPD norm matrix.

    ``D``: blocks (A_u^D, c_p^-1 M_p, W_w) on the four-block layout;
    ``DE``: (A_u^E, alpha^2 B_b D_bb^-1 B_b^T + c_p^-1 M_p, W_w);
    ``Dtilde``: (D_bb, A_u^E, alpha^2 B_b D_bb^-1 B_b^T + c_p^-1 M_p, W_w).
    """
    b = system.blocks
    prm = system.params
    c_p = system.derived.c_p
    D_bb = system.D_bb if system.D_bb is not None else bubble_diagonal(b.A_bb, b.dim)
    Dinv = 1.0 / D_bb
    W_w = _w_block(b, system.tau, c_p)
    W_p = as_csr(b.M_p / c_p)
    if which == "D":
        A_uD = sp.bmat([[sp.diags(D_bb), b.A_bl], [b.A_bl.T, b.A_ll]])
        return as_csr(sp.block_diag([A_uD, W_p, W_w]))
    A_uE = as_csr(b.A_ll - sparse_triple_product(b.A_bl.T, Dinv, b.A_bl))
    A_pS = as_csr(W_p + prm.alpha ** 2 * sparse_triple_product(b.B_b, Dinv, b.B_b.T))
    if which == "DE":
        return as_csr(sp.block_diag([A_uE, A_pS, W_w]))
    if which == "Dtilde":
        return as_csr(sp.block_diag([sp.diags(D_bb), A_uE, A_pS, W_w]))
    raise ValueError(f"unknown norm matrix {which!r}")


def preconditioner_norm(system: BiotSystem) -> sp.csr_matrix:
    """Inverse of the exact block-diagonal preconditioner: blockdiag(A_u, W_p, W_w).

    ``A_u`` is the displacement block of ``system`` (A_u, A_u^D or A_u^E) and
    ``W_p`` carries the bubble term for the eliminated system.
    """
    W = build_weighted_blocks(system)
    return as_csr(sp.block_diag([W.A_u, W.W_p, W.W_w]))


# ---------------------------------------------------------------------------
# constants

def inf_sup_constant(A, D, cutoff=ZERO_SV_CUTOFF):
    """(gamma, varsigma): smallest positive and largest singular value of D^-1/2 A D^-1/2."""
    A, D = _dense(A), _dense(D)
    _check_size(A.shape[0])
    C = sla.cholesky(D, lower=True)
    X = sla.solve_triangular(C, A, lower=True)
    X = sla.solve_triangular(C, X.T, lower=True).T
    # eigenvalues of X^T X are the squared singular values of the pencil (A^T D^-1 A, D)
    w = dense_sym_eig(_sym(X.T @ X))
    s = np.sqrt(np.clip(w, 0.0, None))
    smax = s.max()
    pos = s[s > cutoff * smax]
    return float(pos.min()), float(smax)


def spectral_interval(A, B):
    """Extreme eigenvalues of the symmetric pencil (A, B)."""
    w = dense_sym_eig(_dense(A), _dense(B))
    return float(w[0]), float(w[-1])


def _as_dense_operator(P, n):
    if hasattr(P, "S_u"):
        for s in (P.S_u, P.S_p, P.S_w):
            if getattr(s, "kind", None) == "krylov":
                raise ValueError("field-of-values bounds need a linear preconditioner")
    if isinstance(P, np.ndarray) or sp.issparse(P):
        return _dense(P)
    f = P.apply if hasattr(P, "apply") else P
    return np.column_stack([f(e) for e in np.eye(n)])


def fov_bounds(L, A, G, side="left"):
    """Field-of-values constants (Sigma, Upsilon) of a preconditioned operator.

    ``G`` is the SPD inner-product matrix: N^-1 for left preconditioning
    (operator L A) and N for right preconditioning (operator A L).  With
    N the exact block-diagonal preconditioner, the lower triangular one is
    analysed from the left and the upper triangular one from the right.

    Sigma = lambda_min(sym(G T), G), Upsilon = sqrt(lambda_max(T^T G T, G)).
    """
    A = _dense(A)
    n = A.shape[0]
    _check_size(n)
    Lm = _as_dense_operator(L, n)
    T = Lm @ A if side == "left" else A @ Lm
    G = _sym(_dense(G))
    Sigma = dense_sym_eig(_sym(G @ T), G)[0]
    Ups2 = dense_sym_eig(_sym(T.T @ G @ T), G)[-1]
    return float(Sigma), float(np.sqrt(Ups2))


def fov_setting(system: BiotSystem, family: str):
    """(side, G) for a triangular family: lower from the left in the N^-1
    inner product, upper from the right in the N inner product."""
    Nd = _dense(preconditioner_norm(system))
    if family == "lower":
        return "left", Nd
    if family == "upper":
        return "right", _sym(np.linalg.inv(Nd))
    raise ValueError(f"no field-of-values setting for {family!r}")


def fov_constants(system: BiotSystem, P):
    """(Sigma, Upsilon) of a triangular preconditioner ``P`` on ``system``."""
    side, G = fov_setting(system, P.family)
    return fov_bounds(P, system.matrix(), G, side)


def fov_envelope(L, A, G, b, side="left", tol=1e-10, max_it=500):
    """GMRES residual history in the G-inner product and the FOV envelope.

    GMRES is run on ``C T C^-1`` with ``G = C^T C`` so the Euclidean residual
    equals the G-norm residual of the original operator.  Returns
    ``(history, rate)`` with ``rate = 1 - Sigma^2 / Upsilon^2``.
    """
    A = _dense(A)
    n = A.shape[0]
    Lm = _as_dense_operator(L, n)
    T = Lm @ A if side == "left" else A @ Lm
    G = _sym(_dense(G))
    Sigma, Ups = fov_bounds(Lm, A, G, side)
    C = sla.cholesky(G, lower=False)  # G = C^T C
    Tt = C @ T @ np.linalg.inv(C)
    rhs = C @ (Lm @ b if side == "left" else b)
    _, rep = fgmres(Tt, rhs, None, tol=tol, max_it=max_it)
    return np.asarray(rep.history), 1.0 - Sigma ** 2 / Ups ** 2


def equivalence_deviation(S, A):
    """rho = ||I - S A||_A for a linear approximate inverse S of SPD A."""
    if getattr(S, "kind", None) == "krylov":
        raise ValueError("equivalence deviation needs a linear sub-solver")
    A = _dense(A)
    n = A.shape[0]
    _check_size(n)
    Sm = _as_dense_operator(S, n)
    E = np.eye(n) - Sm @ A
    w = dense_sym_eig(_sym(E.T @ A @ E), A)
    return float(np.sqrt(max(w[-1], 0.0)))


def effective_deviation(solve, A, probes=None):
    """max ||x - solve(A x)||_A / ||x||_A over A-eigenvectors (or given probes).

    Works for nonlinear (tolerance-bounded) solvers by sampling.
    """
    A = _dense(A)
    if probes is None:
        _, probes = dense_sym_eig(A, vectors=True)
    out = 0.0
    for x in probes.T:
        e = x - solve(A @ x)
        out = max(out, np.sqrt(e @ A @ e) / np.sqrt(x @ A @ x))
    return float(out)


# ---------------------------------------------------------------------------
# proof-chain inequalities

@dataclass
class InequalityResult:
    name: str
    measured: float
    bound: float
    kind: str  # "le": measured <= bound, "ge": measured >= bound
    slack: float = 0.0
    passed: bool = True


def _result(name, measured, bound, kind, atol=1e-9):
    scale = abs(bound) if bound != 0 else 1.0
    slack = (bound - measured) / scale if kind == "le" else (measured - bound) / scale
    return InequalityResult(name, float(measured), float(bound), kind, float(slack), bool(slack >= -atol))


def verify_paper_inequalities(system: BiotSystem, atol=1e-9):
    """Evaluate the stability-proof inequalities as generalized eigenvalues.

    Returns ``(results, constants)`` with measured ``eta2`` and ``gamma_B``.
    """
    b = system.blocks
    prm = system.params
    d = b.dim
    zeta, c_p = system.derived.zeta, system.derived.c_p
    a = prm.alpha
    D_bb = system.D_bb if system.D_bb is not None else bubble_diagonal(b.A_bb, d)
    Dinv = 1.0 / D_bb
    Mp = b.M_p.diagonal()
    A_u = _dense(b.A_u)
    A_uD = _dense(sp.bmat([[sp.diags(D_bb), b.A_bl], [b.A_bl.T, b.A_ll]]))
    _check_size(A_u.shape[0])
    B_u = _dense(b.B_u)
    B_b = _dense(b.B_b)
    A_bb = _dense(b.A_bb)
    A_uE = _dense(b.A_ll - sparse_triple_product(b.A_bl.T, Dinv, b.A_bl))
    B_uE = _dense(b.B_l - sparse_triple_product(b.B_b, Dinv, b.A_bl))
    BDB = (B_b * Dinv) @ B_b.T
    Mp_mat = np.diag(Mp)
    A_pS = Mp_mat / c_p + a * a * BDB
    A_pE = Mp_mat / prm.M + a * a * BDB

    res = []
    lam = dense_sym_eig(_sym(B_u.T @ (B_u / Mp[:, None])), A_u)[-1]
    res.append(_result("div_bound_Au", lam, 1.0 / zeta ** 2, "le", atol))
    lam = dense_sym_eig(_sym(B_b.T @ (B_b / Mp[:, None])), A_bb)[-1]
    res.append(_result("div_bound_bubble", lam, 1.0 / zeta ** 2, "le", atol))
    lo, hi = spectral_interval(A_bb, np.diag(D_bb))
    res.append(_result("Abb_le_Dbb", hi, 1.0, "le", atol))
    res.append(_result("Abb_positive", lo, 0.0, "ge", atol))
    lo, eta2 = spectral_interval(A_uD, A_u)
    res.append(_result("Au_le_AuD", lo, 1.0, "ge", atol))
    Ainv_BT = np.linalg.solve(A_u, B_u.T)
    gB2 = dense_sym_eig(_sym(B_u @ Ainv_BT), Mp_mat)[0]  # = gamma_B^2 / zeta^2
    res.append(_result("stokes_infsup_Au", gB2, 0.0, "ge", atol))
    lamD = dense_sym_eig(_sym(B_u @ np.linalg.solve(A_uD, B_u.T)), Mp_mat)[0]
    res.append(_result("stokes_infsup_AuD", lamD, gB2 / eta2, "ge", atol))
    lamE = dense_sym_eig(_sym(B_uE @ np.linalg.solve(A_uE, B_uE.T) + BDB), Mp_mat)[0]
    res.append(_result("elim_pressure_lower", lamE, gB2 / eta2, "ge", atol))
    lam = dense_sym_eig(A_pS, Mp_mat / c_p)[0]
    res.append(_result("ApS_ge_Mp", lam, 1.0, "ge", atol))
    lam = dense_sym_eig(A_pS, A_pE)[0]
    res.append(_result("ApS_ge_ApE", lam, 1.0, "ge", atol))
    lam = dense_sym_eig(_sym(zeta ** 2 * B_uE.T @ (B_uE / Mp[:, None])), A_uE)[-1]
    res.append(_result("elim_div_bound", lam, 1.0, "le", atol))
    for name, lo_, hi_ in _ldl_intervals(system):
        res.append(_result(f"{name}_lower", lo_, 0.25, "ge", atol))
        res.append(_result(f"{name}_upper", hi_, 2.0, "le", atol))
    consts = {"eta2": float(eta2), "gamma_B": float(np.sqrt(gB2) * zeta), "zeta": zeta, "c_p": c_p}
    return res, consts


def _elimination_factors(system: BiotSystem):
    """Sparse L^-1 and L-tilde^-1 of the block factorization of the diagonal-bubble system."""
    b = system.blocks
    a = system.params.alpha
    D_bb = system.D_bb if system.D_bb is not None else bubble_diagonal(b.A_bb, b.dim)
    Dinv = sp.diags(1.0 / D_bb)
    nb, nl, npr, nw = b.sizes
    I = [sp.identity(n, format="csr") for n in (nb, nl, npr, nw)]

    def lower(sign):
        return as_csr(sp.bmat([[I[0], None, None, None],
                               [-b.A_bl.T @ Dinv, I[1], None, None],
                               [sign * a * (b.B_b @ Dinv), None, I[2], None],
                               [None, None, None, I[3]]]))
    return lower(+1.0), lower(-1.0)


def _ldl_intervals(system):
    Linv, Ltinv = _elimination_factors(system)
    D = norm_matrix(system, "D")
    Dt = _dense(norm_matrix(system, "Dtilde"))
    out = []
    for name, F in (("LDL", Linv), ("LtDLt", Ltinv)):
        M = _dense(F @ D @ F.T)
        out.append((name,) + spectral_interval(0.5 * (M + M.T), Dt))
    return out


@dataclass
class LSLReport:
    factor_error: float
    subblock_error: float
    d11_error: float
    passed: bool


def lsl_decomposition_check(diag_sys: BiotSystem, elim_sys: BiotSystem | None = None, tol=1e-11):
    """Verify A^D = L S L-tilde^T and that the eliminated system sits inside S.

    Errors are relative to the largest entry of A^D (max norm).
    """
    if diag_sys.variant != DIAG:
        raise ValueError("the factorization applies to the diagonal-bubble system")
    b = diag_sys.blocks
    a, M, tau = diag_sys.params.alpha, diag_sys.params.M, diag_sys.tau
    Dinv = 1.0 / diag_sys.D_bb
    A_uE = as_csr(b.A_ll - sparse_triple_product(b.A_bl.T, Dinv, b.A_bl))
    B_uE = as_csr(b.B_l - sparse_triple_product(b.B_b, Dinv, b.A_bl))
    A_pE = as_csr(b.M_p / M + a * a * sparse_triple_product(b.B_b, Dinv, b.B_b.T))
    S = as_csr(sp.bmat([[sp.diags(diag_sys.D_bb), None, None, None],
                        [None, A_uE, a * B_uE.T, None],
                        [None, -a * B_uE, A_pE, -tau * b.B_w],
                        [None, None, tau * b.B_w.T, tau * b.M_w]]))
    Linv, Ltinv = _elimination_factors(diag_sys)
    L = spla.inv(sp.csc_matrix(Linv))
    Lt = spla.inv(sp.csc_matrix(Ltinv))
    AD = diag_sys.matrix()
    scale = abs(AD).max()
    err = abs(as_csr(L @ S @ Lt.T) - AD).max() / scale
    nb = b.sizes[0]
    sub = S[nb:, nb:]
    if elim_sys is None:
        elim_sys = eliminate_bubbles(diag_sys)
    sub_err = abs(as_csr(sub - elim_sys.matrix())).max() / scale
    d11 = abs(as_csr(S[:nb, :nb] - sp.diags((b.dim + 1) * b.A_bb.diagonal()))).max()
    return LSLReport(float(err), float(sub_err), float(d11),
                     bool(err < tol and sub_err < tol and d11 == 0.0))


def schur_complement_error(diag_sys: BiotSystem, elim_sys: BiotSystem):
    """max |A^E - (A^D / D_bb)| relative to max |A^D|."""
    AD = _dense(diag_sys.matrix())
    nb = diag_sys.blocks.sizes[0]
    A11, A12, A21, A22 = AD[:nb, :nb], AD[:nb, nb:], AD[nb:, :nb], AD[nb:, nb:]
    S = A22 - A21 @ np.linalg.solve(A11, A12)
    return float(np.abs(S - _dense(elim_sys.matrix())).max() / np.abs(AD).max())


def constants_report(system: BiotSystem, **params):
    """inf-sup/continuity constants of a diag or eliminated system in its weighted norm."""
    which = "DE" if system.variant == ELIM else "D"
    if system.variant not in (DIAG, ELIM):
        raise ValueError("constants are defined for the diagonal-bubble and eliminated systems")
    g, s = inf_sup_constant(system.matrix(), norm_matrix(system, which))
    return ConstantsReport(gamma=g, varsigma=s, params=params)
