"""Command-line front end: ``phinv <verb> [options]``.

Exit status is 0 on success, 2 when an iteration fails to converge (or
diverges) and 3 on invalid input, including matrices for which the
requested function is singular.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import experiments as ex
from .exceptions import InputError, IterationError, PhinvError
from .inverse import (HeatDiscretization, NonlocalProblem, SolverConfig, TwoPointProblem,
                      heat_inverse_experiment, nonlocal_forward, solve_nonlocal,
                      solve_two_point)
from .krylov import GmresConfig, arnoldi_psi2_baseline, psi2_apply
from .mmio import read_matrix, read_vector, write_matrix, write_vector
from .newton import NewtonConfig, newton_invert, psi_dense
from .phi import phi_action, phi_matrices, phi_matrix
from .psi1 import RationalApproxParams, ShiftedSolveWorkspace, psi1_apply, r_nm_matrix

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INPUT = 0, 2, 3


def _out(args, name):
    """Explicit ``--out`` or ``<out-dir>/<name>``."""
    if getattr(args, "out", None):
        return Path(args.out)
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _sidecar(path, suffix):
    return path.with_name(path.stem + suffix)


def _emit(obj):
    print(json.dumps(obj, default=float, sort_keys=True))


def _write_result(args, res, name=None):
    path = _out(args, (name or res.name) + ".csv")
    res.write(path)
    _emit({"experiment": res.name, "csv": str(path), "summary": res.summary})
    return res


# --------------------------------------------------------------------------
# verbs on user-supplied matrices
# --------------------------------------------------------------------------

def cmd_phi_eval(args):
    A = read_matrix(args.matrix)
    if args.vector:
        y = phi_action(args.ell, A, read_vector(args.vector), compensated=args.compensated)
        path = _out(args, f"phi{args.ell}_v.txt")
        write_vector(path, y)
    else:
        path = _out(args, f"phi{args.ell}.mtx")
        write_matrix(path, phi_matrix(args.ell, A))
    _emit({"verb": "phi-eval", "ell": args.ell, "out": str(path)})


def cmd_psi1_apply(args):
    A = read_matrix(args.matrix)
    b = read_vector(args.vector)
    params = RationalApproxParams(args.n, args.m)
    ws = ShiftedSolveWorkspace(A, args.m)
    y = psi1_apply(A, b, params, ws, compensated=args.compensated)
    path = _out(args, "psi1_v.txt")
    write_vector(path, y)
    res = ws.residuals(b, ws.solve_all(b))
    log = _sidecar(path, "_shifts.jsonl")
    with open(log, "w") as fh:
        for k, (shift, r) in enumerate(zip(ws.shifts, res), 1):
            fh.write(json.dumps({"k": k, "shift": shift, "relative_residual": r}) + "\n")
    _emit({"verb": "psi1-apply", "n": args.n, "m": args.m, "out": str(path), "log": str(log),
           "max_shift_residual": max(res)})


def cmd_psi2_apply(args):
    A = read_matrix(args.matrix)
    b = read_vector(args.vector)
    path = _out(args, "psi2_v.txt")
    if args.baseline:
        x, trace = arnoldi_psi2_baseline(A, b, min(args.maxit, A.shape[0]), stop_tol=args.tol)
        report = {"method": "arnoldi", "steps": trace.steps, "err1": trace.err1,
                  "subdiagonal": trace.subdiagonal, "breakdown": trace.breakdown}
    else:
        try:
            x, rep = psi2_apply(A, b, RationalApproxParams(args.n, args.m),
                                GmresConfig(tol=args.tol, maxit=args.maxit),
                                compensated=args.compensated)
        except IterationError as exc:
            write_vector(path, exc.result)
            _sidecar(path, "_report.json").write_text(json.dumps(exc.report.to_dict(), default=float))
            raise
        report = dict(method="gmres", **rep.to_dict())
    write_vector(path, x)
    rpath = _sidecar(path, "_report.json")
    rpath.write_text(json.dumps(report, default=float, indent=1))
    _emit({"verb": "psi2-apply", "out": str(path), "report": str(rpath)})


def _write_history(path, history):
    with open(path, "w") as fh:
        fh.write("iteration,residual\n")
        for k, r in enumerate(history):
            fh.write(f"{k},{r:.16e}\n")


def cmd_newton_invert(args):
    A = read_matrix(args.matrix)
    ell = args.ell
    if ell == 1:
        X0 = r_nm_matrix(A, RationalApproxParams(args.n, args.m))
    else:
        X0 = psi_dense(A, ell - 1)
    B = phi_matrices(A, ell)[ell]
    path = _out(args, f"psi{ell}.mtx")
    hist = _sidecar(path, "_history.csv")
    try:
        X, rep = newton_invert(B, X0, NewtonConfig(tol=args.tol, maxit=args.maxit),
                               compensated=args.compensated)
    except IterationError as exc:
        _write_history(hist, exc.report.residual_history)
        raise
    write_matrix(path, X)
    _write_history(hist, rep.residual_history)
    _emit({"verb": "newton-invert", "ell": ell, "iterations": rep.iterations,
           "final_residual": rep.final_residual, "out": str(path), "history": str(hist)})


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def cmd_table1(args):
    _write_result(args, ex.table1_experiment(args.N, dense_check=not args.no_dense))


def _pairs(text):
    out = []
    for item in text.split(","):
        n, m = item.split(":")
        out.append((int(n), int(m)))
    return out


def cmd_tnew(args):
    pairs = _pairs(args.params) if args.params else None
    res = ex.tnew_experiment(args.which, pairs, N=args.N, epsilon=args.epsilon,
                             compensated=not args.plain, parallel=args.parallel)
    _write_result(args, res)
    for row in res.rows:
        _emit(dict(zip(res.columns, row)))


def cmd_surface(args):
    res = ex.error_surface(RationalApproxParams(args.n, args.m), tuple(args.re), tuple(args.im),
                           args.grid)
    _write_result(args, res, f"surface_n{args.n}_m{args.m}")


def cmd_baseline(args):
    _write_result(args, ex.baseline_comparison(args.which, N=args.N, jmax=args.jmax))


def _solver_cfg(args):
    return SolverConfig(args.n, args.m, args.tol, args.maxit, args.compensated)


def _write_recovery(args, name, z, x, truth):
    path = _out(args, f"{name}.txt")
    write_vector(path, x)
    epath = _sidecar(path, "_error.csv")
    with open(epath, "w") as fh:
        fh.write("grid_point,recovered,true,abs_error\n")
        for zi, xi, ti in zip(z, np.real_if_close(x), truth):
            fh.write(f"{zi:.16e},{np.real(xi):.16e},{ti:.16e},{abs(xi - ti):.16e}\n")
    return path, epath


def _heat_case(args):
    heat = HeatDiscretization(args.heat_N, args.heat_sigma)
    return heat, np.sin(2 * np.pi * heat.z)


def cmd_inverse(args):
    cfg = _solver_cfg(args)
    truth, z = None, None
    if args.problem == "heat":
        res = heat_inverse_experiment(args.heat_N, args.heat_sigma, cfg)
        x, rep, truth, z = res.f_hat, res.report, res.f_true, res.z
    elif args.problem == "two-point":
        if args.matrix:
            prob = TwoPointProblem(read_matrix(args.matrix), read_vector(args.q),
                                   read_vector(args.g))
        else:
            heat, truth = _heat_case(args)
            z = heat.z
            g = phi_matrix(2, heat.A) @ truth
            prob = TwoPointProblem(heat.A, np.zeros(args.heat_N), g)
        x, rep = solve_two_point(prob, cfg)
    else:
        if args.matrix:
            prob = NonlocalProblem(read_matrix(args.matrix), args.T, read_vector(args.u0),
                                   read_vector(args.u1))
        else:
            heat, truth = _heat_case(args)
            z = heat.z
            u0 = np.zeros(args.heat_N)
            prob = NonlocalProblem(heat.A, args.T, u0, nonlocal_forward(heat.A, args.T, u0, truth))
        x, rep = solve_nonlocal(prob, cfg)
    if args.truth:
        truth = read_vector(args.truth)
    name = f"inverse_{args.problem.replace('-', '_')}"
    out = {"verb": "inverse", "problem": args.problem, "iterations": rep.iterations,
           "matvecs": rep.matvecs, "relative_residual": rep.final_relative_residual}
    if truth is not None:
        if z is None:
            z = np.arange(len(truth), dtype=float)
        path, epath = _write_recovery(args, name, z, x, truth)
        out.update(out=str(path), errors=str(epath),
                   max_error=float(np.max(np.abs(x - truth))))
    else:
        path = _out(args, f"{name}.txt")
        write_vector(path, x)
        out["out"] = str(path)
    _emit(out)


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _solver_flags(p, tol=1e-12, maxit=60):
    p.add_argument("--n", type=int, default=2, help="Bernoulli order of r_{n,m}")
    p.add_argument("--m", type=int, default=32, help="number of shifted solves")
    p.add_argument("--tol", type=float, default=tol)
    p.add_argument("--maxit", type=int, default=maxit)
    p.add_argument("--compensated", action="store_true",
                   help="double-double arithmetic for the operator")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="BLAS threads (default: $PHINV_THREADS or library default)")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--parallel", action="store_true",
                        help="run independent experiment rows concurrently")

    p = argparse.ArgumentParser(prog="phinv", parents=[common],
                                description="phi-functions, their inverses and experiments")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("phi-eval", parents=[common], help="phi_ell(A) or phi_ell(A) v")
    s.add_argument("--matrix", required=True)
    s.add_argument("--vector")
    s.add_argument("--ell", type=int, default=1)
    s.add_argument("--compensated", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_phi_eval)

    s = sub.add_parser("psi1-apply", parents=[common], help="r_{n,m}(A) b")
    s.add_argument("--matrix", required=True)
    s.add_argument("--vector", required=True)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--m", type=int, default=32)
    s.add_argument("--compensated", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_psi1_apply)

    s = sub.add_parser("psi2-apply", parents=[common], help="psi_2(A) b by preconditioned GMRES")
    s.add_argument("--matrix", required=True)
    s.add_argument("--vector", required=True)
    _solver_flags(s)
    s.add_argument("--baseline", action="store_true", help="Arnoldi projection method instead")
    s.add_argument("--out")
    s.set_defaults(func=cmd_psi2_apply)

    s = sub.add_parser("newton-invert", parents=[common], help="dense psi_ell(A) by Newton")
    s.add_argument("--matrix", required=True)
    s.add_argument("--ell", type=int, default=2, choices=(1, 2, 3))
    _solver_flags(s, maxit=30)
    s.add_argument("--out")
    s.set_defaults(func=cmd_newton_invert)

    s = sub.add_parser("table1", parents=[common], help="spectral radius table")
    s.add_argument("--N", type=int, default=128)
    s.add_argument("--no-dense", action="store_true", help="skip the dense cross-check")
    s.set_defaults(func=cmd_table1)

    s = sub.add_parser("tnew", parents=[common], help="preconditioned GMRES tables")
    s.add_argument("--which", type=int, choices=(1, 2), required=True)
    s.add_argument("--N", type=int, default=128)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--params", help="comma-separated n:m pairs, e.g. 3:8,3:16")
    s.add_argument("--plain", action="store_true", help="plain double operator")
    s.set_defaults(func=cmd_tnew)

    s = sub.add_parser("surface", parents=[common], help="error of r_{n,m} on a grid")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--m", type=int, default=32)
    s.add_argument("--re", type=float, nargs=2, default=(-3.0, 3.0))
    s.add_argument("--im", type=float, nargs=2, default=(-3.0, 3.0))
    s.add_argument("--grid", type=int, default=64)
    s.set_defaults(func=cmd_surface)

    s = sub.add_parser("baseline", parents=[common], help="Arnoldi projection error sequences")
    s.add_argument("--which", type=int, choices=(1, 2), required=True)
    s.add_argument("--N", type=int, default=128)
    s.add_argument("--jmax", type=int, default=40)
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("inverse", parents=[common], help="inverse problems")
    s.add_argument("problem", choices=("two-point", "nonlocal", "heat"))
    s.add_argument("--matrix")
    s.add_argument("--q")
    s.add_argument("--g")
    s.add_argument("--u0")
    s.add_argument("--u1")
    s.add_argument("--T", type=float, default=1.0)
    s.add_argument("--truth", help="true solution vector, for the error CSV")
    s.add_argument("--heat-N", type=int, default=128)
    s.add_argument("--heat-sigma", type=float, default=10.0)
    _solver_flags(s, tol=1e-10, maxit=40)
    s.add_argument("--out")
    s.set_defaults(func=cmd_inverse)
    return p


def _check_file_args(args):
    if getattr(args, "verb", None) != "inverse" or not args.matrix:
        return
    need = ("q", "g") if args.problem == "two-point" else ("u0", "u1")
    if args.problem == "heat":
        raise InputError("inverse heat generates its own data; drop --matrix")
    missing = [f"--{k}" for k in need if not getattr(args, k)]
    if missing:
        raise InputError(f"--matrix needs {' '.join(missing)}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("PHINV_THREADS"):
        threads = int(os.environ["PHINV_THREADS"])
    try:
        _check_file_args(args)
        with threadpool_limits(limits=threads):
            args.func(args)
    except IterationError as exc:
        print(f"phinv: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (PhinvError, ValueError, OSError) as exc:
        print(f"phinv: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
