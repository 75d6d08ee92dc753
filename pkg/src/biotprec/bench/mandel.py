"""Analytic pressure for Mandel's problem."""
from __future__ import annotations

import numpy as np


def mandel_roots(nu, nu_u, n_max, tol=1e-14):
    """Positive roots of ``tan(x) = kappa x`` with ``kappa = (1 - nu) / (nu_u - nu)``.

    For ``kappa > 1`` the n-th root is the unique zero of
    ``sin(x) - kappa x cos(x)`` in ``((n-1) pi, (n-1) pi + pi/2)``, the first
    one excluding zero; it is located by bisection until the bracket is
    narrower than ``tol``.
    """
    if nu_u <= nu:
        raise ValueError("undrained Poisson ratio must exceed the drained one")
    kappa = (1.0 - nu) / (nu_u - nu)
    n = np.arange(n_max, dtype=float)
    lo, hi = n * np.pi, n * np.pi + 0.5 * np.pi
    f_lo = np.sin(lo) - kappa * lo * np.cos(lo)
    f_lo[0] = 1.0 - kappa  # slope of f at the trivial root x = 0
    for _ in range(200):  # all brackets at once
        if np.all(hi - lo <= tol * np.maximum(1.0, lo)):
            break
        mid = 0.5 * (lo + hi)
        f_mid = np.sin(mid) - kappa * mid * np.cos(mid)
        left = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(left, mid, lo)
        f_lo = np.where(left, f_mid, f_lo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def mandel_constants(cfg):
    """(p0, c): initial pressure and consolidation coefficient."""
    prm = cfg.params()
    p0 = cfg.B * (1.0 + cfg.nu_u) * cfg.F / (3.0 * cfg.a)
    c = cfg.k / cfg.mu_f * (prm.lam + 2.0 * prm.mu)
    return p0, c


def mandel_pressure(x, t, cfg, n_max=20000):
    """Series pressure at abscissae ``x`` and time ``t``.

    Terms are added until ``|term| < cfg.series_tol * |sum|`` at every point.
    """
    if t < 0:
        raise ValueError("time must be non-negative")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p0, c = mandel_constants(cfg)
    a = cfg.a
    total = np.zeros_like(x)
    roots = mandel_roots(cfg.nu, cfg.nu_u, n_max)
    for an in roots:
        coef = np.sin(an) / (an - np.sin(an) * np.cos(an)) * np.exp(-an * an * c * t / a ** 2)
        term = coef * (np.cos(an * x / a) - np.cos(an))
        total += term
        if np.all(np.abs(term) <= cfg.series_tol * np.abs(total)):
            break
    return 2.0 * p0 * total
