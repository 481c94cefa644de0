"""Reproduction experiments producing CSV-serializable result tables."""

import csv
import io
import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError
from .krylov import GmresConfig, arnoldi_psi2_baseline, psi2_apply
from .newton import convergence_precheck
from .phi import phi_action, phi_matrix, phi_scalar
from .psi1 import RationalApproxParams, r_nm_scalar
from .testmatrices import TestMatrixSpec, build_matrix, toeplitz_eigenvalues

_INT = re.compile(r"^[+-]?\d+$")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def _kind(v):
    if isinstance(v, (bool, np.bool_, int, np.integer)):
        return "int"
    if isinstance(v, (float, np.floating)):
        return "float"
    return "str"


def _parse(s, kind=None):
    if kind == "str":
        return s
    if kind == "int" or (kind is None and _INT.match(s)):
        return int(s)
    try:
        return float(s)
    except ValueError:
        return s


@dataclass
class ExperimentResult:
    """A named table with its parameters.

    Every cell belongs to a labeled column.  Floats are written with 17
    significant digits so :meth:`from_csv` reproduces them exactly.
    """

    name: str
    params: dict
    columns: list
    rows: list = field(default_factory=list)
    note: str = ""
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise InputError(f"row {r!r} does not match columns {self.columns!r}")

    def column(self, label):
        i = self.columns.index(label)
        return [r[i] for r in self.rows]

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# name: {self.name}\n")
        buf.write(f"# params: {json.dumps(self.params, sort_keys=True)}\n")
        buf.write(f"# summary: {json.dumps(self.summary, sort_keys=True)}\n")
        if self.rows:
            buf.write(f"# types: {','.join(_kind(v) for v in self.rows[0])}\n")
        if self.note:
            for line in self.note.splitlines():
                buf.write(f"# note: {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        name, params, summary, notes, body, kinds = "", {}, {}, [], [], None
        for line in text.splitlines():
            if line.startswith("# name: "):
                name = line[8:]
            elif line.startswith("# params: "):
                params = json.loads(line[10:])
            elif line.startswith("# summary: "):
                summary = json.loads(line[11:])
            elif line.startswith("# types: "):
                kinds = line[9:].split(",")
            elif line.startswith("# note: "):
                notes.append(line[8:])
            else:
                body.append(line)
        rows = list(csv.reader(body))
        columns = rows[0]
        kinds = kinds or [None] * len(columns)
        data = [[_parse(c, k) for c, k in zip(r, kinds)] for r in rows[1:]]
        return cls(name, params, columns, data, "\n".join(notes), summary)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def _run_rows(fn, items, parallel):
    if parallel and len(items) > 1:
        with ThreadPoolExecutor(len(items)) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# --------------------------------------------------------------------------
# spectral radius table
# --------------------------------------------------------------------------

def table1_experiment(N=128, h_values=None, dense_check=None):
    """``rho(I - psi_1(A) phi_2(A))`` for ``A = (N^2/h) tridiag(0.5, 0, -0.5)``.

    The primary value maps the known eigenvalues ``i (N^2/h) cos(k pi/(N+1))``
    through ``1 - phi_2/phi_1``.  When ``dense_check`` (default: ``N <= 128``)
    the matrix functions are also formed densely and the spectral radius of
    ``R`` is estimated directly.
    """
    if N < 2:
        raise InputError("N must be at least 2")
    if h_values is None:
        h_values = [("1", 1.0), ("N", float(N)), ("N^2", float(N) ** 2), ("N^4", float(N) ** 4)]
    else:
        h_values = [(_fmt(h), float(h)) for h in h_values]
    if dense_check is None:
        dense_check = N <= 128
    rows = []
    for label, h in h_values:
        mu = toeplitz_eigenvalues(N, h)
        rho = float(np.max(np.abs(1.0 - phi_scalar(2, mu) / phi_scalar(1, mu))))
        dense = float("nan")
        if dense_check:
            A = build_matrix(TestMatrixSpec("toeplitz_tridiag", N, h=h))
            dense = convergence_precheck(A, 1, method="dense")
        rows.append([label, h, rho, dense])
    return ExperimentResult(
        "table1", {"N": N}, ["h_label", "h", "rho_mapping", "rho_dense"], rows,
        note="rho by scalar spectral mapping; rho_dense from dense phi matrices "
             "and a power-iteration estimate (nan when skipped)")


# --------------------------------------------------------------------------
# preconditioned GMRES tables
# --------------------------------------------------------------------------

TNEW_DEFAULTS = {
    1: dict(epsilon=1e-14, params=[(3, 8), (3, 16), (3, 32)]),
    2: dict(epsilon=1e-8, params=[(3, 16), (3, 32), (3, 64), (3, 128)]),
}


def tnew_problem(which, N=128, epsilon=None):
    """Matrix, right-hand side and reference solution of a preconditioned-GMRES test.

    ``which=1``: cyclic shift plus ``epsilon e e^T``, ``b = e_1``, reference
    from a dense solve with ``phi_2(A)``.  ``which=2``: spectrum at the zeros
    of ``phi_2``, reference ``w = e`` and ``b = phi_2(A) e`` evaluated with
    compensated arithmetic.
    """
    if which not in (1, 2):
        raise InputError("which must be 1 or 2")
    eps = TNEW_DEFAULTS[which]["epsilon"] if epsilon is None else epsilon
    if which == 1:
        A = build_matrix(TestMatrixSpec("itnew1", N, epsilon=eps))
        b = np.zeros(N)
        b[0] = 1.0
        ref = np.linalg.solve(phi_matrix(2, A), b)
    else:
        A = build_matrix(TestMatrixSpec("itnew2", N, epsilon=eps))
        ref = np.ones(N, dtype=complex)
        b = phi_action(2, A, ref, compensated=True)
    return A, b, ref


def tnew_experiment(which, params_list=None, N=128, epsilon=None, tol=1e-12, maxit=60,
                    compensated=True, parallel=False):
    """Run preconditioned GMRES for ``psi_2(A) b`` over several ``(n, m)``.

    ``it_gmres`` counts operator applications (Arnoldi steps plus the final
    explicit residual check); the Arnoldi step count is reported separately.
    """
    A, b, ref = tnew_problem(which, N, epsilon)
    pairs = params_list or TNEW_DEFAULTS[which]["params"]
    cfg = GmresConfig(tol=tol, maxit=maxit)
    ref_norm = np.linalg.norm(ref)

    def run(nm):
        n, m = nm
        t0 = time.perf_counter()
        x, rep = psi2_apply(A, b, RationalApproxParams(n, m), cfg, compensated=compensated)
        err2 = float(np.linalg.norm(x - ref) / ref_norm)
        return [n, m, rep.matvecs, rep.iterations, rep.relative_history[-1],
                rep.final_relative_residual, err2, time.perf_counter() - t0]

    rows = _run_rows(run, list(pairs), parallel)
    return ExperimentResult(
        f"tnew{which}",
        {"which": which, "N": N, "epsilon": TNEW_DEFAULTS[which]["epsilon"] if epsilon is None
         else epsilon, "tol": tol, "maxit": maxit, "compensated": compensated},
        ["n", "m", "it_gmres", "arnoldi_steps", "relres", "relres_explicit", "err2", "seconds"],
        rows)


# --------------------------------------------------------------------------
# error surface of r_{n,m}
# --------------------------------------------------------------------------

def error_surface(params, re_range=(-3.0, 3.0), im_range=(-3.0, 3.0), grid=64, mask_radius=1e-8):
    """``|psi_1(z) - r_{n,m}(z)|`` on a ``grid x grid`` lattice.

    Points within ``mask_radius`` of a pole ``2 pi i k`` (``k != 0``) are
    reported as ``nan`` and excluded from the maximum.
    """
    if grid < 16:
        raise InputError("grid must be at least 16")
    re = np.linspace(re_range[0], re_range[1], grid)
    im = np.linspace(im_range[0], im_range[1], grid)
    Z = re[None, :] + 1j * im[:, None]
    k = np.rint(Z.imag / (2 * np.pi))
    masked = (k != 0) & (np.abs(Z - 2j * np.pi * k) <= mask_radius)
    Zs = np.where(masked, 0.0, Z)
    with np.errstate(all="ignore"):
        err = np.abs(1.0 / phi_scalar(1, Zs) - r_nm_scalar(params, Zs))
    err = np.where(masked, np.nan, err)
    rows = [[float(Z[i, j].real), float(Z[i, j].imag), float(err[i, j])]
            for i in range(grid) for j in range(grid)]
    return ExperimentResult(
        "surface",
        {"n": params.n, "m": params.m, "re_range": list(re_range), "im_range": list(im_range),
         "grid": grid},
        ["re", "im", "abs_error"], rows,
        summary={"max_error": float(np.nanmax(err)), "masked": int(masked.sum())})


# --------------------------------------------------------------------------
# Arnoldi baseline
# --------------------------------------------------------------------------

def baseline_comparison(which, N=128, jmax=40, epsilon=None):
    """err1 and err2 of the Arnoldi projection method on a preconditioned-GMRES test.

    The process continues through near-breakdowns (``breakdown_tol=0``) and
    numerically singular ``phi_2(H_j)`` are recorded rather than fatal.
    """
    A, b, ref = tnew_problem(which, N, epsilon)
    _, trace = arnoldi_psi2_baseline(A, b, min(jmax, N), reference=ref, breakdown_tol=0.0,
                                     on_singular="record")
    rows = []
    for j in range(1, trace.steps + 1):
        e1 = trace.err1[j - 2] if j >= 2 else float("nan")
        rows.append([j, e1, trace.err2[j - 1], trace.subdiagonal[j - 1],
                     int(j in trace.singular_steps)])
    err2 = np.array(trace.err2)
    return ExperimentResult(
        f"baseline{which}", {"which": which, "N": N, "jmax": jmax},
        ["j", "err1", "err2", "h_next", "singular"], rows,
        summary={"min_err2": float(err2.min()), "argmin_j": int(err2.argmin()) + 1,
                 "final_err2": float(err2[-1])})
