"""Command-line entry point ``biotbench``."""
from __future__ import annotations

import argparse
import csv
import os
import sys
from fractions import Fraction

import numpy as np

from .. import analysis, biot
from ..precond import preconditioner_from_id
from ..core_la import write_matrix_market
from . import runner
from .problems import config_for, setup_problem


def parse_h(text) -> int:
    """``1/64`` or ``64`` -> 64 intervals per side."""
    v = Fraction(str(text).strip())
    if v <= 0:
        raise ValueError(f"mesh size {text!r} is not 1/N")
    N = 1 / v if v < 1 else v
    if N.denominator != 1 or N <= 0:
        raise ValueError(f"mesh size {text!r} is not 1/N")
    return int(N)


def _opt_float(text):
    return None if text in (None, "", "none", "None") else float(text)


def read_config(path) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment."""
    cfg = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value")
            key, val = (t.strip() for t in line.split("=", 1))
            cfg[key.replace("-", "_")] = val
    return cfg


def _list(val, conv):
    return [conv(v.strip()) for v in str(val).split(",") if v.strip()]


def spec_from_config(cfg: dict) -> runner.SweepSpec:
    known = {"problem", "h", "tau", "nu", "perm", "perm_jump", "precond", "inexact", "variant",
             "tol", "max_it", "out"}
    unknown = set(cfg) - known
    if unknown:
        raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
    return runner.SweepSpec(
        problem=cfg.get("problem", "mandel2d"),
        Ns=_list(cfg.get("h", "1/8"), parse_h),
        taus=_list(cfg.get("tau", "0.01"), float),
        nus=_list(cfg.get("nu", "none"), _opt_float),
        ks=_list(cfg.get("perm", "1e-6"), float),
        k_jumps=_list(cfg.get("perm_jump", "none"), _opt_float),
        preconds=_list(cfg.get("precond", "bd"), str),
        inexact=cfg.get("inexact", "false").lower() in ("1", "true", "yes"),
        variant=cfg.get("variant") or None,
        tol=float(cfg.get("tol", 1e-8)),
        max_it=int(cfg.get("max_it", 500)),
    )


def _print_rows(rows, columns):
    w = csv.DictWriter(sys.stdout, fieldnames=list(columns), extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow(r)


def cmd_run(args):
    rep = runner.run_case(args.problem, parse_h(args.h), args.tau, args.nu, args.perm,
                          args.precond, args.inexact, args.variant, args.perm_jump, args.tol,
                          args.max_it)
    row = rep.as_row()
    if args.out:
        runner.write_csv(args.out, [row])
    _print_rows([row], runner.CSV_COLUMNS)
    return 0 if rep.converged else 1


def cmd_sweep(args):
    cfg = read_config(args.spec)
    spec = spec_from_config(cfg)
    out = args.out or cfg.get("out") or "sweep.csv"
    rows, summary = runner.run_sweep(spec, out)
    _print_rows(summary, ("precond", "variant", "inexact", "min_iters", "max_iters", "ratio"))
    return 0 if all(int(r["converged"]) for r in rows) else 1


def _system(args, variant):
    cfg = config_for(args.problem, args.nu, args.perm, args.perm_jump)
    _, _, blocks, params = setup_problem(args.problem, parse_h(args.h), cfg)
    return biot.build_system(blocks, params, args.tau, variant)


def cmd_analyze(args):
    ok = True
    rows = []
    nu = runner._nu_default(args.problem) if args.nu is None else args.nu
    base = dict(problem=args.problem, h=args.h, tau=args.tau, nu=nu, k=args.perm)
    if args.check == "infsup":
        for variant in (biot.DIAG, biot.ELIM):
            rep = analysis.constants_report(_system(args, variant), variant=variant, **base)
            ok &= rep.gamma > 0
            rows.append(rep.as_row())
        _print_rows(rows, list(rows[0]))
    elif args.check == "fov":
        for variant, pids in ((biot.FULL, ("bl", "bu")), (biot.ELIM, ("ble", "bue"))):
            s = _system(args, variant)
            for pid in pids:
                Sig, Ups = analysis.fov_constants(s, preconditioner_from_id(pid, s))
                ok &= Sig > 0
                rows.append(analysis.ConstantsReport(Sigma=Sig, Upsilon=Ups,
                                                     params=dict(base, variant=variant, precond=pid)).as_row())
        _print_rows(rows, list(rows[0]))
    elif args.check == "inequalities":
        res, consts = analysis.verify_paper_inequalities(_system(args, biot.DIAG))
        for r in res:
            print(f"{r.name},{r.kind},{r.measured:.6e},{r.bound:.6e},{r.slack:.3e},{'pass' if r.passed else 'FAIL'}")
            ok &= r.passed
        print(",".join(f"{k}={v:.6e}" for k, v in consts.items()))
    elif args.check == "lsl":
        rep = analysis.lsl_decomposition_check(_system(args, biot.DIAG))
        print(f"factor_error={rep.factor_error:.3e},subblock_error={rep.subblock_error:.3e},"
              f"d11_error={rep.d11_error:.3e},{'pass' if rep.passed else 'FAIL'}")
        ok = rep.passed
    return 0 if ok else 1


def cmd_export_mm(args):
    os.makedirs(args.out, exist_ok=True)
    for variant in (biot.FULL, biot.DIAG, biot.ELIM):
        s = _system(args, variant)
        write_matrix_market(os.path.join(args.out, f"{variant}.mtx"), s.matrix(),
                            comment=f"{args.problem} h={args.h} tau={args.tau} {variant}")
        np.savetxt(os.path.join(args.out, f"{variant}_rhs.txt"), biot.backward_euler_rhs(s))
        names = ("u_l", "p", "w") if variant == biot.ELIM else ("u_b", "u_l", "p", "w")
        with open(os.path.join(args.out, f"{variant}_blocks.txt"), "w") as fh:
            for name, size in zip(names, s.sizes):
                fh.write(f"{name} {size}\n")
    print(args.out)
    return 0


def _problem_args(p, h="1/8"):
    p.add_argument("--problem", default="mandel2d", choices=runner.PROBLEMS)
    p.add_argument("--h", default=h)
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--perm", type=float, default=1e-6)
    p.add_argument("--perm-jump", type=float, default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="biotbench", description="Block preconditioner benchmarks "
                                 "for the three-field Biot model")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="one backward-Euler step solved with FGMRES")
    _problem_args(p)
    p.add_argument("--precond", default="bd", choices=sorted(runner.precond.PRECOND_IDS))
    p.add_argument("--inexact", action="store_true")
    p.add_argument("--variant", choices=(biot.FULL, biot.DIAG, biot.ELIM), default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-it", type=int, default=500)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="parameter sweep from a key=value file")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("analyze", help="dense stability checks on small meshes")
    _problem_args(p, h="1/4")
    p.add_argument("--check", required=True, choices=("infsup", "fov", "inequalities", "lsl"))
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("export-mm", help="write the system matrices in Matrix Market format")
    _problem_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_mm)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"biotbench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
