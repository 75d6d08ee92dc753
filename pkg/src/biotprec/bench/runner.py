"""Single runs, parameter sweeps, timing scaling and the Mandel accuracy check."""
from __future__ import annotations

import csv
import functools
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .. import biot, krylov, precond
from ..core_la import factorize
from .mandel import mandel_pressure
from .problems import config_for, setup_problem

CSV_COLUMNS = ("problem", "variant", "precond", "inexact", "h", "tau", "nu", "k", "k_jump",
               "iters", "converged", "relres", "setup_s", "solve_s")
TIMING_COLUMNS = ("setup_s", "solve_s")
PROBLEMS = ("mandel2d", "footing3d")


def default_variant(pid):
    return biot.ELIM if precond.PRECOND_IDS[pid][1] else biot.FULL


@functools.lru_cache(maxsize=2)
def _setup(problem, N, nu, k, k_jump, standard_shear):
    cfg = config_for(problem, nu, k, k_jump, standard_shear)
    return setup_problem(problem, N, cfg)


def _nu_default(problem):
    return 0.0 if problem == "mandel2d" else 0.2


def run_case(problem, N, tau, nu=None, k=1e-6, pid="bd", inexact=False, variant=None,
             k_jump=None, tol=1e-8, max_it=500, inner_tol=1e-3, standard_shear=False):
    """One backward-Euler step from a zero state, solved with preconditioned FGMRES.

    ``N`` is the number of mesh intervals per side (h = 1/N).  Returns a
    :class:`krylov.SolveReport` whose ``params`` hold the CSV key columns.
    """
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    if pid not in precond.PRECOND_IDS:
        raise ValueError(f"unknown preconditioner id {pid!r}")
    nu = _nu_default(problem) if nu is None else float(nu)
    variant = variant or default_variant(pid)
    _, _, blocks, params = _setup(problem, int(N), nu, float(k),
                                  None if k_jump is None else float(k_jump), standard_shear)
    system = biot.build_system(blocks, params, tau, variant)
    rhs = biot.backward_euler_rhs(system)
    t0 = time.perf_counter()
    P = precond.preconditioner_from_id(pid, system, inexact, inner_tol)
    setup_s = time.perf_counter() - t0
    row = dict(problem=problem, variant=variant, precond=pid, inexact=int(bool(inexact)),
               h=f"1/{int(N)}", tau=tau, nu=nu, k=k, k_jump="" if k_jump is None else k_jump)
    _, rep = krylov.fgmres(system.op, rhs, P, tol=tol, max_it=max_it, params=row)
    rep.setup_s = setup_s
    return rep


@dataclass
class SweepSpec:
    problem: str = "mandel2d"
    Ns: list = field(default_factory=lambda: [8])
    taus: list = field(default_factory=lambda: [0.01])
    nus: list = field(default_factory=lambda: [None])
    ks: list = field(default_factory=lambda: [1e-6])
    k_jumps: list = field(default_factory=lambda: [None])
    preconds: list = field(default_factory=lambda: ["bd"])
    inexact: bool = False
    variant: str | None = None
    tol: float = 1e-8
    max_it: int = 500

    def __post_init__(self):
        for name in ("Ns", "taus", "nus", "ks", "k_jumps", "preconds"):
            if not getattr(self, name):
                raise ValueError(f"empty sweep list {name!r}")
        for pid in self.preconds:
            if pid not in precond.PRECOND_IDS:
                raise ValueError(f"unknown preconditioner id {pid!r}")

    def points(self):
        """Grid points in deterministic order."""
        return itertools.product(self.Ns, self.nus, self.ks, self.k_jumps, self.taus, self.preconds)


def run_sweep(spec: SweepSpec, out=None):
    """Run every grid point; failures are recorded in the row and the sweep continues.

    Writes ``out`` and ``<out>.summary.csv`` when ``out`` is given and
    returns ``(rows, summary)``.
    """
    rows = []
    for N, nu, k, kj, tau, pid in spec.points():
        try:
            rep = run_case(spec.problem, N, tau, nu, k, pid, spec.inexact, spec.variant, kj,
                           spec.tol, spec.max_it)
            rows.append(rep.as_row())
        except Exception as exc:  # noqa: BLE001 - recorded per row
            nu_ = _nu_default(spec.problem) if nu is None else nu
            rows.append(dict(problem=spec.problem, variant=spec.variant or default_variant(pid),
                             precond=pid, inexact=int(spec.inexact), h=f"1/{N}", tau=tau, nu=nu_,
                             k=k, k_jump="" if kj is None else kj, iters=-1, converged=0,
                             relres=f"error: {exc}", setup_s="", solve_s=""))
    summary = summarize(rows)
    if out is not None:
        write_csv(out, rows)
        write_summary(str(out) + ".summary.csv", summary)
    return rows, summary


def summarize(rows):
    """max/min iteration ratio per (precond, variant, inexact) over converged rows."""
    groups = {}
    for r in rows:
        if int(r["converged"]):
            groups.setdefault((r["precond"], r["variant"], r["inexact"]), []).append(int(r["iters"]))
    out = []
    for (pid, var, inex), its in groups.items():
        out.append(dict(precond=pid, variant=var, inexact=inex, min_iters=min(its),
                        max_iters=max(its), ratio=f"{max(its) / min(its):.4f}"))
    return out


def write_csv(path, rows, columns=CSV_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def write_summary(path, summary):
    cols = ("precond", "variant", "inexact", "min_iters", "max_iters", "ratio")
    write_csv(path, summary, cols)


def timing_scaling(problem, variant, pid, Ns, tau=0.01, nu=None, k=1e-6, repeats=1):
    """Inexact solve time against the number of elements, with the log-log slope.

    Returns ``(n_elements, times, slope)``; each time is the best of
    ``repeats`` FGMRES solves.
    """
    if len(Ns) < 3:
        raise ValueError("timing scaling needs at least three mesh sizes")
    n_el, times = [], []
    for N in Ns:
        best = np.inf
        for _ in range(repeats):
            rep = run_case(problem, N, tau, nu, k, pid, True, variant)
            best = min(best, rep.solve_s)
        mesh = _setup(problem, int(N), _nu_default(problem) if nu is None else float(nu),
                      float(k), None, False)[0]
        n_el.append(mesh.n_elements)
        times.append(best)
    slope = np.polyfit(np.log(n_el), np.log(times), 1)[0]
    return np.array(n_el), np.array(times), float(slope)


def mandel_accuracy(N, t_end=0.01, steps=20, nu=0.2, k=1e-6, cfg=None):
    """Centroid L2 pressure error of backward Euler against the analytic series.

    The full enriched system is factorized once and stepped from a zero
    initial state; returns ``(error, relative_error)`` at ``t_end``.
    """
    cfg = cfg or config_for("mandel2d", nu, k)
    mesh, _, blocks, params = setup_problem("mandel2d", N, cfg)
    tau = t_end / steps
    system = biot.build_system(blocks, params, tau, biot.FULL)
    F = factorize(system.matrix(), "sparse_lu")
    u = p = None
    for _ in range(steps):
        x = F.solve(biot.backward_euler_rhs(system, u, p))
        u, p, _ = biot.full_state(system, x)
    xc = mesh.element_centroids()[:, 0]
    exact = mandel_pressure(xc, t_end, cfg)
    vol = blocks.M_p.diagonal()
    err = np.sqrt(np.sum(vol * (p - exact) ** 2))
    return float(err), float(err / np.sqrt(np.sum(vol * exact ** 2)))
