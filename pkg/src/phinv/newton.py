"""Newton-Schulz inversion of phi-functions.

For ``B = phi_{l+1}(A)`` and the starting point ``X_0 = psi_l(A)`` the
iteration ``X_{k+1} = 2 X_k - X_k B X_k`` satisfies
``I - B X_{k+1} = (I - B X_k)^2``, so it converges quadratically to
``psi_{l+1}(A)`` whenever ``rho(I - psi_l(A) phi_{l+1}(A)) < 1``; this holds
for every matrix with spectrum in the strip ``|Im z| <= pi/2``.
"""

import warnings
from dataclasses import asdict, dataclass
from typing import List

import numpy as np

from . import dd
from ._validation import check_matrix
from .exceptions import (DenseSizeWarning, Diverged, InputError, MaxitReached,
                         SingularMatrix, SingularPhi, StripViolation)
from .linalg import lu_factor, lu_solve, spectral_radius_estimate, strip_check
from .phi import _order, phi_matrices
from .psi1 import RationalApproxParams, r_nm_matrix

DENSE_WARN_SIZE = 2048


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping rules for :func:`newton_invert`.

    Parameters
    ----------
    tol : float
        Stop when the residual norm ``||I - B X_k||`` is at most ``tol``.
    maxit : int
    norm_kind : {"fro", "inf"}
    divergence_factor : float
        Declare divergence when the residual exceeds this multiple of the
        initial residual.
    """

    tol: float = 1e-12
    maxit: int = 30
    norm_kind: str = "fro"
    divergence_factor: float = 1e3

    def __post_init__(self):
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if int(self.maxit) != self.maxit or self.maxit < 1:
            raise InputError("maxit must be a positive integer")
        if self.norm_kind not in ("fro", "inf"):
            raise InputError(f"unknown norm_kind {self.norm_kind!r}")


@dataclass
class NewtonReport:
    """Residual norms ``||I - B X_k||`` for ``k = 0 .. iterations``."""

    iterations: int
    residual_history: List[float]
    converged: bool
    final_residual: float

    def to_dict(self):
        return asdict(self)


def _norm(M, kind):
    return float(np.linalg.norm(M, "fro" if kind == "fro" else np.inf))


def newton_invert(B, X0, cfg=None, callback=None, compensated=False):
    """Approximate ``B^{-1}`` by Newton-Schulz iteration from ``X0``.

    Each iteration forms ``Y = B X_k`` once, records ``||I - Y||`` and sets
    ``X_{k+1} = X_k (2I - Y)``: two matrix products.  The residual is always
    measured against the given ``B``, so an inexact ``X0`` only costs
    iterations.

    In double precision the residual cannot fall much below
    ``n * eps * ||B|| ||X||``, so the exact squaring ``r_{k+1} = ||R_k^2||``
    is only visible above that floor.  ``compensated=True`` keeps the
    iterate and the residual in double-double arithmetic (about 4x the cost),
    which moves the floor to roughly ``eps**2`` and makes the final step
    square as well.

    Parameters
    ----------
    B, X0 : array_like
        Square matrices of equal size.
    cfg : NewtonConfig, optional
    callback : callable, optional
        Called as ``callback(k, X_k, residual)``.
    compensated : bool
        Double-double iterates and residuals.

    Returns
    -------
    X : ndarray
    report : NewtonReport

    Raises
    ------
    Diverged
        Residual above ``divergence_factor`` times the initial one (or not
        finite); typical when ``rho(I - X0 B) >= 1``.
    MaxitReached
    Both carry the last iterate and the report.
    """
    cfg = cfg or NewtonConfig()
    B = check_matrix(B, name="B")
    X = check_matrix(X0, name="X0")
    if B.shape != X.shape:
        raise InputError(f"B and X0 differ in shape: {B.shape} vs {X.shape}")
    if compensated:
        return _newton_dd(B, X, cfg, callback)
    n = B.shape[0]
    I = np.eye(n)
    history = []
    for k in range(cfg.maxit + 1):
        Y = B @ X
        res = _norm(I - Y, cfg.norm_kind)
        history.append(res)
        if callback is not None:
            callback(k, X, res)
        if res <= cfg.tol:
            return X, NewtonReport(k, history, True, res)
        if not np.isfinite(res) or (k > 0 and res > cfg.divergence_factor * history[0]):
            raise Diverged(f"residual grew from {history[0]:.3e} to {res:.3e} at iteration {k}",
                           result=X, report=NewtonReport(k, history, False, res))
        if k == cfg.maxit:
            break
        X = X @ (2.0 * I - Y)
    raise MaxitReached(f"no convergence in {cfg.maxit} iterations (residual {res:.3e})",
                       result=X, report=NewtonReport(cfg.maxit, history, False, res))


def _newton_dd(B, X, cfg, callback):
    I = np.eye(B.shape[0])
    Bd = dd.DDMatrix(B)
    x_hi = X.astype(np.result_type(B.dtype, X.dtype))
    x_lo = np.zeros_like(x_hi)
    history = []
    for k in range(cfg.maxit + 1):
        y_hi, y_lo = Bd.matvec(x_hi, x_lo)
        r_hi, r_lo = dd.add_double(-y_hi, -y_lo, I)
        R = r_hi + r_lo
        res = _norm(R, cfg.norm_kind)
        history.append(res)
        X = x_hi + x_lo
        if callback is not None:
            callback(k, X, res)
        if res <= cfg.tol:
            return X, NewtonReport(k, history, True, res)
        if not np.isfinite(res) or (k > 0 and res > cfg.divergence_factor * history[0]):
            raise Diverged(f"residual grew from {history[0]:.3e} to {res:.3e} at iteration {k}",
                           result=X, report=NewtonReport(k, history, False, res))
        if k == cfg.maxit:
            break
        # X_{k+1} = X_k (2I - Y) = X_k + X_k R_k
        p_hi, p_lo = dd.DDMatrix(x_hi).matvec(r_hi, r_lo)
        p_hi, p_lo = dd.two_sum(p_hi, p_lo + x_lo @ r_hi)
        x_hi, x_lo = dd.add(x_hi, x_lo, p_hi, p_lo)
    raise MaxitReached(f"no convergence in {cfg.maxit} iterations (residual {res:.3e})",
                       result=X, report=NewtonReport(cfg.maxit, history, False, res))


def _invert(P, err):
    try:
        f = lu_factor(P)
    except SingularMatrix as exc:
        raise err(str(exc)) from exc
    return lu_solve(f, np.eye(P.shape[0], dtype=P.dtype))


def psi_dense(A, ell):
    """``psi_ell(A) = phi_ell(A)^{-1}`` by LU inversion."""
    ell = _order(ell).ell
    return _invert(phi_matrices(check_matrix(A), ell)[ell], SingularPhi)


def convergence_precheck(A, ell=1, tol=1e-10, method="auto"):
    """Estimate ``rho(I - psi_ell(A) phi_{ell+1}(A))``.

    A value below one guarantees quadratic convergence of the Newton
    iteration started at ``psi_ell(A)``.

    Raises
    ------
    SingularPhi
        When ``phi_ell(A)`` is numerically singular.
    """
    ell = _order(ell, cap=2).ell
    A = check_matrix(A)
    P = phi_matrices(A, ell + 1)
    try:
        f = lu_factor(P[ell])
    except SingularMatrix as exc:
        raise SingularPhi(str(exc)) from exc
    R = np.eye(A.shape[0]) - lu_solve(f, P[ell + 1])
    return spectral_radius_estimate(R, tol=tol, method=method)


def psi_inverse_chain(A, target_ell=2, cfg=None, method="dense", params=None,
                      force=False, eigenvalues=None):
    """Compute ``psi_1(A)`` or ``psi_2(A)``.

    ``psi_1(A)`` comes from LU inversion of ``phi_1(A)`` (``method="dense"``)
    or from ``r_{n,m}(A)`` refined by Newton against ``phi_1(A)``
    (``method="rational"``).  ``psi_2(A)`` is then obtained by Newton on
    ``phi_2(A)`` from ``X_0 = psi_1(A)``.

    Parameters
    ----------
    eigenvalues : array_like, optional
        Known spectrum; computed densely when omitted.
    force : bool
        Skip the strip check.

    Raises
    ------
    StripViolation
        An eigenvalue has ``|Im z| > pi/2`` and ``force`` is false.
    """
    if target_ell not in (1, 2):
        raise InputError("target_ell must be 1 or 2")
    A = check_matrix(A)
    n = A.shape[0]
    if n > DENSE_WARN_SIZE:
        warnings.warn(f"dense Newton inversion at N={n} is expensive; structured "
                      "compression is not implemented", DenseSizeWarning, stacklevel=2)
    if not force:
        eigs = np.linalg.eigvals(A) if eigenvalues is None else eigenvalues
        if not strip_check(eigs):
            raise StripViolation("spectrum leaves the strip |Im z| <= pi/2; use force=True "
                                 "to attempt the iteration anyway")
    cfg = cfg or NewtonConfig()
    P = phi_matrices(A, 2)
    if method == "dense":
        X1 = _invert(P[1], SingularPhi)
    elif method == "rational":
        X1, _ = newton_invert(P[1], r_nm_matrix(A, params or RationalApproxParams()), cfg)
    else:
        raise InputError(f"unknown method {method!r}")
    if target_ell == 1:
        return X1
    X2, _ = newton_invert(P[2], X1, cfg)
    return X2
