"""Dense linear-algebra substrate.

Matrices and vectors are plain NumPy arrays (``float64`` or ``complex128``,
C order).  LU factorization is delegated to LAPACK through SciPy; the Arnoldi
process and the spectral radius estimator are implemented here because the
solvers above depend on their exact conventions.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from ._validation import check_matrix, check_vector
from .exceptions import DimensionMismatch, InputError, NoConvergenceWarning, SingularMatrix

EPS = np.finfo(np.float64).eps
HALF_PI = 0.5 * np.pi


# --------------------------------------------------------------------------
# LU
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LUFactors:
    """Partial-pivoting LU factors ``P A = L U`` in LAPACK packed form.

    Solves through :func:`lu_solve` satisfy
    ``||A x - b||_2 <= c * eps * ||A||_2 * ||x||_2`` with ``c`` a small
    multiple of ``n`` (backward stability of partial pivoting for the
    matrices used here).
    """

    lu: np.ndarray
    piv: np.ndarray
    shape: tuple

    @property
    def n(self):
        return self.shape[0]


def lu_factor(A):
    """Factor a square matrix with partial pivoting.

    Raises
    ------
    SingularMatrix
        If a pivot magnitude falls below ``eps * ||A||_inf * n``.
    """
    A = check_matrix(A)
    n = A.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    threshold = EPS * np.linalg.norm(A, np.inf) * n
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= threshold:
        k = int(np.argmin(pivots))
        raise SingularMatrix(
            f"pivot {k} has magnitude {pivots[k]:.3e} <= threshold {threshold:.3e}")
    return LUFactors(lu, piv, A.shape)


def lu_solve(factors, b):
    """Solve ``A x = b`` from :func:`lu_factor` output; ``b`` may be a block of columns."""
    b = check_vector(b, factors.n, allow_block=True)
    lu = factors.lu
    if b.dtype.kind == "c" and lu.dtype.kind != "c":
        # real factors, complex data: two real solves keep the real fast path
        re = scipy.linalg.lu_solve((lu, factors.piv), b.real, check_finite=False)
        im = scipy.linalg.lu_solve((lu, factors.piv), b.imag, check_finite=False)
        return re + 1j * im
    return scipy.linalg.lu_solve((lu, factors.piv), b, check_finite=False)


def matmul(A, B):
    """Matrix product with a dimension check.

    NumPy's BLAS-backed product is deterministic for a fixed thread count,
    which is the determinism the callers rely on.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[-1] != B.shape[0]:
        raise DimensionMismatch(f"inner dimensions differ: {A.shape} @ {B.shape}")
    return A @ B


# --------------------------------------------------------------------------
# Arnoldi
# --------------------------------------------------------------------------

@dataclass
class ArnoldiFactorization:
    """Result of ``k`` Arnoldi steps.

    ``W`` holds ``k + 1`` columns (the last is the next basis vector, zero
    after a breakdown) and ``Hbar`` is the ``(k + 1) x k`` Hessenberg matrix,
    so that ``A @ W[:, :k] == W @ Hbar`` up to rounding.
    """

    W: np.ndarray
    Hbar: np.ndarray
    breakdown: bool
    steps: int

    @property
    def Wj(self):
        return self.W[:, : self.steps]

    @property
    def Hj(self):
        return self.Hbar[: self.steps, : self.steps]


class ArnoldiProcess:
    """Incremental Arnoldi iteration, modified Gram-Schmidt plus one reorthogonalization pass.

    Parameters
    ----------
    apply : callable
        ``v -> A v``.
    b : ndarray
        Starting vector, must be nonzero; the basis starts at ``b / ||b||``.
    maxdim : int
        Maximum number of steps.
    breakdown_tol : float
        A step breaks down when the new subdiagonal entry is at most
        ``breakdown_tol`` times the norm of ``A v_k``.  ``0.0`` only flags an
        exact zero.
    """

    def __init__(self, apply, b, maxdim, breakdown_tol=EPS):
        b = np.asarray(b)
        beta = np.linalg.norm(b)
        if beta == 0.0:
            raise InputError("Arnoldi needs a nonzero starting vector")
        n = b.shape[0]
        dtype = np.result_type(np.float64, b.dtype)
        self.apply = apply
        self.maxdim = int(maxdim)
        self.breakdown_tol = breakdown_tol
        self.beta = beta
        self.V = np.zeros((n, self.maxdim + 1), dtype=dtype)
        self.H = np.zeros((self.maxdim + 1, self.maxdim), dtype=dtype)
        self.V[:, 0] = b / beta
        self.k = 0
        self.breakdown = False

    def _upcast(self):
        self.V = self.V.astype(np.complex128)
        self.H = self.H.astype(np.complex128)

    def step(self):
        """Take one step; return the new subdiagonal entry ``h_{k+1,k}``."""
        if self.breakdown or self.k >= self.maxdim:
            raise InputError("no further Arnoldi steps available")
        k = self.k
        w = np.asarray(self.apply(self.V[:, k]))
        if w.dtype.kind == "c" and self.V.dtype.kind != "c":
            self._upcast()
        w = w.astype(self.V.dtype, copy=True)
        wnorm = np.linalg.norm(w)
        for _ in range(2):
            for i in range(k + 1):
                h = np.vdot(self.V[:, i], w)
                self.H[i, k] += h
                w -= h * self.V[:, i]
        hnext = np.linalg.norm(w)
        self.H[k + 1, k] = hnext
        self.k = k + 1
        if hnext == 0.0 or hnext <= self.breakdown_tol * wnorm:
            self.breakdown = True
        else:
            self.V[:, k + 1] = w / hnext
        return hnext

    def factorization(self):
        k = self.k
        return ArnoldiFactorization(
            W=self.V[:, : k + 1].copy(), Hbar=self.H[: k + 1, :k].copy(),
            breakdown=self.breakdown, steps=k)


def arnoldi(apply, b, j, breakdown_tol=EPS):
    """Run up to ``j`` Arnoldi steps from ``b``.

    A happy breakdown stops early; the partial factorization is returned with
    ``breakdown=True``.
    """
    b = check_vector(b)
    if j < 1 or j > b.shape[0]:
        raise InputError(f"need 1 <= j <= len(b), got j={j}")
    if callable(apply):
        op = apply
    else:
        M = check_matrix(apply)
        op = M.__matmul__
    proc = ArnoldiProcess(op, b, j, breakdown_tol=breakdown_tol)
    while proc.k < j and not proc.breakdown:
        proc.step()
    return proc.factorization()


# --------------------------------------------------------------------------
# Spectra
# --------------------------------------------------------------------------

@dataclass
class SpectrumInfo:
    eigenvalues: np.ndarray
    kappa2: Optional[float] = None
    in_strip: bool = field(init=False)

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues)
        self.in_strip = strip_check(self.eigenvalues)


def strip_check(eigs):
    """True iff every eigenvalue has ``|Im z| <= pi/2`` (boundary included)."""
    eigs = np.atleast_1d(np.asarray(eigs))
    if eigs.size == 0:
        raise InputError("strip_check needs at least one eigenvalue")
    return bool(np.all(np.abs(np.imag(eigs)) <= HALF_PI))


def spectrum_info(A, condition=False):
    """Dense eigen-decomposition of ``A``; optionally the eigenvector condition number."""
    A = check_matrix(A)
    if condition:
        w, S = np.linalg.eig(A)
        return SpectrumInfo(w, kappa2=float(np.linalg.cond(S)))
    return SpectrumInfo(np.linalg.eigvals(A))


def is_normal(A, rtol=1e-10):
    A = np.asarray(A)
    AH = A.conj().T
    return np.linalg.norm(AH @ A - A @ AH) <= rtol * np.linalg.norm(A) ** 2


def _settled(ref, atol):
    """Window spread and extrapolated tail ``d q / (1 - q)`` both within ``atol``."""
    if max(ref) - min(ref) > atol:
        return False
    d = np.abs(np.diff(ref))
    if d[-1] == 0.0:
        return True
    prev = d[:-1][d[:-1] > 0]
    q = float(np.max(d[1:][d[:-1] > 0] / prev)) if prev.size else 0.0
    return q < 1.0 and d[-1] * q / (1.0 - q) <= atol


def spectral_radius_estimate(A, tol=1e-10, maxit=20000, method="auto", seed=0, window=5):
    """Estimate ``max |lambda|``.

    ``method="power"`` runs block power iteration on two vectors (real
    vectors for real ``A``, so that a dominant conjugate pair is captured)
    with a Rayleigh-Ritz step on the 2x2 projection.  It stops when the
    estimate spreads by at most ``tol * (1 + est)`` over ``window``
    consecutive iterations and a geometric extrapolation of the remaining
    change is below the same bound.  This is an estimate, not a certified
    bound.  ``method="dense"`` uses the LAPACK eigensolver; ``"auto"`` picks
    dense for ``n <= 64``.

    On hitting ``maxit`` the best estimate is returned with a
    :class:`NoConvergenceWarning`.
    """
    A = check_matrix(A)
    n = A.shape[0]
    if method == "auto":
        method = "dense" if n <= 64 else "power"
    if method == "dense":
        return float(np.max(np.abs(np.linalg.eigvals(A))))
    if method != "power":
        raise InputError(f"unknown method {method!r}")

    rng = np.random.default_rng(seed)
    p = min(2, n)
    Q = rng.standard_normal((n, p))
    if A.dtype.kind == "c":
        Q = Q + 1j * rng.standard_normal((n, p))
    Q, _ = np.linalg.qr(Q)
    history = []
    est = 0.0
    for _ in range(maxit):
        Z = A @ Q
        if not np.any(Z):
            return 0.0
        est = float(np.max(np.abs(np.linalg.eigvals(Q.conj().T @ Z))))
        history.append(est)
        if len(history) > window and _settled(history[-window - 1:], tol * (1.0 + est)):
            return est
        Q, R = np.linalg.qr(Z)
        if np.abs(np.diag(R)).max() == 0.0:
            return 0.0
    warnings.warn(f"spectral radius estimate not converged after {maxit} iterations",
                  NoConvergenceWarning, stacklevel=2)
    return est
