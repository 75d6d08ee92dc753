"""Flexible GMRES (right preconditioning) and a plain GMRES for inner solves."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


@dataclass
class SolveReport:
    iterations: int
    history: list
    converged: bool
    setup_s: float = 0.0
    solve_s: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def relres(self):
        return self.history[-1] if self.history else 0.0

    def as_row(self):
        row = dict(self.params)
        row.update(iters=self.iterations, converged=int(self.converged),
                   relres=f"{self.relres:.3e}", setup_s=f"{self.setup_s:.4f}",
                   solve_s=f"{self.solve_s:.4f}")
        return row


def _as_apply(op):
    if op is None:
        return lambda v: v.copy()
    if callable(op) and not hasattr(op, "shape"):
        return op
    if hasattr(op, "apply"):
        return op.apply
    return lambda v: op @ v


def _arnoldi_step(V, H, j, w):
    """Modified Gram-Schmidt against V[:j+1], one extra pass if needed."""
    norm0 = np.linalg.norm(w)
    for i in range(j + 1):
        H[i, j] = V[i] @ w
        w -= H[i, j] * V[i]
    if np.linalg.norm(w) < 0.7 * norm0:
        for i in range(j + 1):
            c = V[i] @ w
            H[i, j] += c
            w -= c * V[i]
    H[j + 1, j] = np.linalg.norm(w)
    return w


def _givens(H, cs, sn, g, j):
    for i in range(j):
        t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
        H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
        H[i, j] = t
    a, b = H[j, j], H[j + 1, j]
    r = np.hypot(a, b)
    cs[j], sn[j] = (1.0, 0.0) if r == 0 else (a / r, b / r)
    H[j, j] = r
    H[j + 1, j] = 0.0
    g[j + 1] = -sn[j] * g[j]
    g[j] = cs[j] * g[j]


def _gmres_core(A, b, P, tol, max_it, restart, flexible, x0=None):
    n = b.shape[0]
    Aop, Pop = _as_apply(A), _as_apply(P)
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), [], True
    history = []
    it = 0
    m = restart or max_it
    r = b - Aop(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    history.append(beta / bnorm)
    if beta / bnorm <= tol:
        return x, history[1:], True
    while it < max_it:
        k = min(m, max_it - it)
        V = np.zeros((k + 1, n))
        Z = np.zeros((k, n)) if flexible else None
        H = np.zeros((k + 1, k))
        cs, sn = np.zeros(k), np.zeros(k)
        g = np.zeros(k + 1)
        g[0] = beta
        V[0] = r / beta
        j_done = 0
        converged = False
        for j in range(k):
            z = Pop(V[j])
            if flexible:
                Z[j] = z
            w = _arnoldi_step(V, H, j, Aop(z))
            _givens(H, cs, sn, g, j)
            it += 1
            j_done = j + 1
            res = abs(g[j + 1]) / bnorm
            history.append(res)
            if res <= tol:
                converged = True
                break
            if H[j + 1, j] == 0.0 and abs(g[j + 1]) == 0.0:
                converged = True
                break
            # happy breakdown: w vanished but estimate above tol, stop and check
            hn = np.linalg.norm(w)
            if hn <= 1e-14 * max(1.0, abs(g[0])):
                break
            V[j + 1] = w / hn
        y = np.linalg.solve(np.triu(H[:j_done, :j_done]), g[:j_done]) if j_done else np.zeros(0)
        if flexible:
            x = x + Z[:j_done].T @ y
        else:
            x = x + Pop(V[:j_done].T @ y)
        if converged:
            return x, history[1:], True
        r = b - Aop(x)
        beta = np.linalg.norm(r)
        if beta / bnorm <= tol:
            history[-1] = beta / bnorm
            return x, history[1:], True
        if j_done < k:  # breakdown without convergence
            break
    return x, history[1:], False


def fgmres(A, b, P=None, tol=1e-8, max_it=500, restart=None, x0=None, params=None):
    """Flexible GMRES with right preconditioning.

    ``P`` may change between iterations (e.g. contain inner Krylov solves);
    the preconditioned directions are stored.  Convergence is judged on the
    Arnoldi residual estimate ``|g_{j+1}| / ||b||`` with a zero initial guess.
    Returns ``(x, SolveReport)``.
    """
    b = np.asarray(b, dtype=float)
    t0 = time.perf_counter()
    x, hist, conv = _gmres_core(A, b, P, tol, max_it, restart, True, x0)
    rep = SolveReport(len(hist), hist, conv, solve_s=time.perf_counter() - t0,
                      params=dict(params or {}))
    return x, rep


def gmres_inner(A, b, M=None, tol=1e-3, max_it=200, return_info=False):
    """Right-preconditioned GMRES with a fixed preconditioner ``M``.

    With ``return_info`` the call returns ``(x, history, converged)``.
    """
    b = np.asarray(b, dtype=float)
    x, hist, conv = _gmres_core(A, b, M, tol, max_it, None, False)
    if return_info:
        return x, hist, conv
    return x
