"""GMRES, the preconditioned psi_2 solver and the Arnoldi projection baseline.

``psi_2(A) b`` is the solution of ``phi_2(A) x = b``.  Multiplying by
``X_0 = psi_1(A)`` and using ``psi_1(A) phi_2(A) = A^{-1} (I - psi_1(A))``
gives the equivalent system

    A^{-1} (I - r(A)) x = r(A) b,         r = r_{n,m} ~ psi_1,

whose operator needs one LU factorization of ``A``, shifted solves and
matrix-vector products, and whose spectrum clusters near ``1 - phi_2/phi_1``
of the eigenvalues of ``A``; it is solved by full GMRES.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg

from ._validation import check_matrix, check_vector
from .exceptions import (InputError, MaxitReached, NotNormal, SingularHessenbergPhi,
                         SingularMatrix, Stagnation)
from .linalg import EPS, ArnoldiProcess, is_normal, lu_factor, lu_solve
from .phi import _phi_scalar_all, _order, phi_matrix
from .psi1 import RationalApproxParams, ShiftedSolveWorkspace, psi1_apply, psi1_complement


@dataclass(frozen=True)
class GmresConfig:
    """GMRES settings.

    Parameters
    ----------
    tol : float
        Target relative residual ``||b - M x|| / ||b||``.
    maxit : int
        Maximum number of Arnoldi steps in total.
    restart : int, optional
        Restart length; ``None`` (default) runs full-memory GMRES.
    breakdown_tol : float
        Relative threshold for a happy breakdown of the Arnoldi process.
    """

    tol: float = 1e-12
    maxit: int = 60
    restart: Optional[int] = None
    breakdown_tol: float = EPS

    def __post_init__(self):
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if int(self.maxit) != self.maxit or self.maxit < 1:
            raise InputError("maxit must be a positive integer")
        if self.restart is not None and not 1 <= self.restart <= self.maxit:
            raise InputError("restart must lie in [1, maxit]")


@dataclass
class SolveReport:
    """Outcome of a GMRES solve.

    ``iterations`` counts Arnoldi steps; ``matvecs`` counts every operator
    application, including the explicit residual check after each cycle.
    ``residual_history`` holds the least-squares residual norms, starting
    with ``||b||``.
    """

    iterations: int
    residual_history: List[float]
    converged: bool
    rhs_norm: float
    matvecs: int
    final_relative_residual: float
    tol: float
    restarts: int = 0
    rhs: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def relative_history(self):
        return [r / self.rhs_norm for r in self.residual_history]

    def to_dict(self):
        d = asdict(self)
        d.pop("rhs")
        d["relative_history"] = self.relative_history
        return d


def _givens(a, b):
    """Rotation ``(c, s)`` with ``[[c, s], [-conj(s), c]] @ [a, b] = [r, 0]``."""
    if b == 0:
        return 1.0, 0.0
    if a == 0:
        return 0.0, 1.0
    t = math.hypot(abs(a), abs(b))
    c = abs(a) / t
    s = (a / abs(a)) * np.conj(b) / t
    return c, s


def gmres(apply, b, cfg=None, callback=None):
    """Solve ``M x = b`` by GMRES from the zero initial guess.

    Parameters
    ----------
    apply : callable
        ``v -> M v``.
    b : array_like
        Nonzero right-hand side.
    cfg : GmresConfig, optional
    callback : callable, optional
        Called as ``callback(k, relres)`` after every Arnoldi step.

    Returns
    -------
    x : ndarray
    report : SolveReport

    Raises
    ------
    MaxitReached
        When ``cfg.maxit`` steps do not reach ``cfg.tol``.
    Stagnation
        When the Krylov space becomes invariant without reaching ``cfg.tol``.
    Both carry the last iterate and the report.
    """
    cfg = cfg or GmresConfig()
    b = check_vector(b)
    beta = float(np.linalg.norm(b))
    if beta == 0.0:
        raise InputError("GMRES needs a nonzero right-hand side")
    counter = [0]

    def op(v):
        counter[0] += 1
        return apply(v)

    x = np.zeros_like(b)
    r = b
    history = [beta]
    steps = 0
    restarts = 0
    target = cfg.tol * beta
    cycle_len = cfg.restart or cfg.maxit

    def report(converged, rel):
        return SolveReport(steps, list(history), converged, beta, counter[0], rel,
                           cfg.tol, restarts)

    while True:
        size = min(cycle_len, cfg.maxit - steps)
        proc = ArnoldiProcess(op, r, size, breakdown_tol=cfg.breakdown_tol)
        R = np.zeros((size + 1, size), dtype=np.complex128)
        g = np.zeros(size + 1, dtype=np.complex128)
        g[0] = proc.beta
        rots = []
        j = 0
        while j < size:
            proc.step()
            h = proc.H[: j + 2, j].astype(np.complex128)
            for i, (c, s) in enumerate(rots):
                h[i], h[i + 1] = c * h[i] + s * h[i + 1], -np.conj(s) * h[i] + c * h[i + 1]
            c, s = _givens(h[j], h[j + 1])
            h[j] = c * h[j] + s * h[j + 1]
            h[j + 1] = 0.0
            rots.append((c, s))
            g[j], g[j + 1] = c * g[j], -np.conj(s) * g[j]
            R[: j + 2, j] = h
            j += 1
            steps += 1
            history.append(float(abs(g[j])))
            if callback is not None:
                callback(steps, history[-1] / beta)
            if history[-1] <= target or proc.breakdown:
                break
        if np.all(np.diag(R[:j, :j]) != 0):
            y = scipy.linalg.solve_triangular(R[:j, :j], g[:j])
        else:
            # singular projected operator after a breakdown: least-squares fallback
            y = scipy.linalg.lstsq(R[: j + 1, :j], g[: j + 1])[0]
        V = proc.V[:, :j]
        if V.dtype.kind != "c" and b.dtype.kind != "c":
            y = y.real
        x = x + V @ y
        r = b - op(x)
        rel = float(np.linalg.norm(r) / beta)
        if rel <= cfg.tol:
            return x, report(True, rel)
        if proc.breakdown:
            raise Stagnation(
                f"Krylov space invariant at step {steps} with relative residual {rel:.3e}",
                result=x, report=report(False, rel))
        if steps >= cfg.maxit:
            raise MaxitReached(
                f"GMRES reached maxit={cfg.maxit} with relative residual {rel:.3e}",
                result=x, report=report(False, rel))
        restarts += 1


# --------------------------------------------------------------------------
# psi_2(A) b
# --------------------------------------------------------------------------

def psi2_operator(A, params=None, ws=None, lu=None, compensated=False):
    """The preconditioned operator ``v -> A^{-1} (v - r_{n,m}(A) v)``."""
    A = check_matrix(A)
    params = params or RationalApproxParams()
    ws = ws or ShiftedSolveWorkspace(A, params.m)
    lu = lu or lu_factor(A)

    def apply(v):
        return lu_solve(lu, psi1_complement(A, v, params, ws, compensated))

    return apply


def psi2_apply(A, b, params=None, cfg=None, compensated=False, ws=None):
    """Approximate ``psi_2(A) b`` by preconditioned GMRES.

    Solves ``A^{-1}(I - r(A)) x = r(A) b`` with ``r = r_{n,m}``; the right-hand
    side is the preconditioned vector ``X_0 b``, not ``b``.  ``A`` is factored
    once and the shifted factorizations are shared by every application.

    Parameters
    ----------
    A : array_like
        Nonsingular square matrix, spectrum nominally in ``|Im z| <= pi/2``.
    b : array_like
    params : RationalApproxParams, optional
    cfg : GmresConfig, optional
    compensated : bool
        Evaluate ``r(A) b`` and ``v - r(A) v`` in double-double arithmetic.
        Needed when ``phi_2(A)`` has eigenvalues near zero (spectrum near the
        poles of ``psi_2``), where rounding noise in the operator would
        otherwise be amplified.
    ws : ShiftedSolveWorkspace, optional

    Returns
    -------
    x : ndarray
    report : SolveReport
        ``report.rhs`` holds the preconditioned right-hand side.
    """
    A = check_matrix(A)
    b = check_vector(b, A.shape[0])
    params = params or RationalApproxParams()
    lu = lu_factor(A)
    ws = ws or ShiftedSolveWorkspace(A, params.m)
    rhs = psi1_apply(A, b, params, ws, compensated)
    op = psi2_operator(A, params, ws, lu, compensated)
    try:
        x, rep = gmres(op, rhs, cfg)
    except (MaxitReached, Stagnation) as exc:
        exc.report.rhs = rhs
        raise
    rep.rhs = rhs
    return x, rep


def spectral_map_rho(eigs, ell=1):
    """``max |1 - phi_{ell+1}(z) / phi_ell(z)|`` over the given eigenvalues.

    For diagonalizable ``A`` this equals ``rho(I - psi_ell(A) phi_{ell+1}(A))``.
    """
    ell = _order(ell, cap=2).ell
    vals = _phi_scalar_all(ell + 1, np.asarray(eigs, dtype=np.complex128))
    return float(np.max(np.abs(1.0 - vals[ell + 1] / vals[ell])))


def gmres_bound_check(A, ell, report, rho=None, rtol=1e-10):
    """Check ``||r_m|| <= rho(R)^m ||r_0||`` at every recorded step.

    Valid for normal ``A`` (eigenvector condition number 1).  ``rho``
    defaults to the spectral mapping of the eigenvalues of ``A``.

    Raises
    ------
    NotNormal
        If ``||A^H A - A A^H||_F > rtol ||A||_F^2``.
    """
    A = check_matrix(A)
    if not is_normal(A, rtol):
        raise NotNormal("the residual bound needs a normal matrix")
    if rho is None:
        rho = spectral_map_rho(np.linalg.eigvals(A), ell)
    h = report.residual_history
    return all(h[m] <= rho ** m * h[0] * (1 + 1e-8) for m in range(len(h)))


# --------------------------------------------------------------------------
# Arnoldi projection baseline
# --------------------------------------------------------------------------

@dataclass
class BaselineTrace:
    """Per-step record of the projection method.

    ``err1[i]`` compares steps ``i + 2`` and ``i + 1`` (it starts at
    ``j = 2``); ``err2[i]`` is the error of step ``i + 1`` against the
    reference, when one was given.
    """

    steps: int = 0
    err1: List[float] = field(default_factory=list)
    err2: List[float] = field(default_factory=list)
    subdiagonal: List[float] = field(default_factory=list)
    singular_steps: List[int] = field(default_factory=list)
    breakdown: bool = False


def arnoldi_psi2_baseline(A, b, jmax, stop_tol=None, reference=None,
                          breakdown_tol=EPS, on_singular="raise"):
    """Approximate ``psi_2(A) b`` by ``W_j psi_2(H_j) e_1 ||b||``.

    ``psi_2(H_j)`` is obtained by factoring ``phi_2(H_j)``.  The iteration
    starts from ``b / ||b||`` and stops when ``err1 <= stop_tol``, on an
    Arnoldi breakdown, or at ``jmax``.

    Parameters
    ----------
    on_singular : {"raise", "record"}
        What to do when ``phi_2(H_j)`` is numerically singular: raise
        :class:`SingularHessenbergPhi`, or note the step and solve anyway.
    breakdown_tol : float
        Passed to the Arnoldi process; ``0.0`` continues through
        near-breakdowns.

    Returns
    -------
    w : ndarray
        Last approximation.
    trace : BaselineTrace
    """
    A = check_matrix(A)
    b = check_vector(b, A.shape[0])
    if not 1 <= jmax <= A.shape[0]:
        raise InputError("need 1 <= jmax <= N")
    if on_singular not in ("raise", "record"):
        raise InputError(f"unknown on_singular {on_singular!r}")
    beta = np.linalg.norm(b)
    proc = ArnoldiProcess(A.__matmul__, b, jmax, breakdown_tol=breakdown_tol)
    trace = BaselineTrace()
    ref_norm = None if reference is None else np.linalg.norm(reference)
    w_prev = None
    w = None
    for j in range(1, jmax + 1):
        trace.subdiagonal.append(float(abs(proc.step())))
        H = proc.H[:j, :j]
        P2 = phi_matrix(2, H)
        rhs = np.zeros(j, dtype=P2.dtype)
        rhs[0] = beta
        try:
            y = lu_solve(lu_factor(P2), rhs)
        except SingularMatrix as exc:
            if on_singular == "raise":
                raise SingularHessenbergPhi(f"phi_2(H_{j}) is numerically singular") from exc
            trace.singular_steps.append(j)
            with np.errstate(all="ignore"):
                y = scipy.linalg.lstsq(P2, rhs)[0]
        w = proc.V[:, :j] @ y
        trace.steps = j
        if reference is not None:
            trace.err2.append(float(np.linalg.norm(reference - w) / ref_norm))
        if w_prev is not None:
            e1 = float(np.linalg.norm(w - w_prev) / np.linalg.norm(w_prev))
            trace.err1.append(e1)
            if stop_tol is not None and e1 <= stop_tol:
                break
        w_prev = w
        if proc.breakdown:
            trace.breakdown = True
            break
    return w, trace
