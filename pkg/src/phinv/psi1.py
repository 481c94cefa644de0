"""Rational approximation of ``psi_1 = 1/phi_1`` and its action on vectors.

``psi_1(z) = z / (e^z - 1)`` is meromorphic with poles at ``2 pi i k``,
``k != 0``.  Its partial-fraction expansion gives the mixed
polynomial/rational approximant

    r_{n,m}(z) = f_n(z)
                 + 2 (-1)^n sum_{k=1}^m (z/2pi)^{2(n+1)} k^{-2n} ((z/2pi)^2 + k^2)^{-1},

    f_n(z) = 1 - z/2 + sum_{i=0}^{n-1} B_{2(i+1)} z^{2(i+1)} / (2(i+1))!,

with ``B_j`` the Bernoulli numbers.  In matrix form the rational part reads
``2 (-1)^n (2pi)^{-2n} A^{2(n+1)} sum_k k^{-2n} (A^2 + (2 pi k)^2 I)^{-1}``,
so applying ``r_{n,m}(A)`` to a vector costs ``m`` shifted solves plus
matrix-vector products.
"""

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from . import dd
from ._validation import check_matrix, check_vector
from .exceptions import (CapExceeded, DegenerateDenominator, InputError, PoleHit,
                         SingularMatrix, SingularShift)
from .linalg import EPS, lu_factor, lu_solve

TWO_PI = 2.0 * np.pi
# pi to about 2**-107 as a rational (hi + lo double-double)
PI_Q = Fraction(np.pi) + Fraction(1.2246467991473532e-16)
MAX_BERNOULLI_K = 60
MAX_N = 8
POLE_TOL = 1e-13


# --------------------------------------------------------------------------
# Bernoulli numbers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BernoulliTable:
    """Bernoulli numbers ``B_0 .. B_{2K}`` as exact rationals (``B_1 = -1/2``)."""

    values: tuple
    K: int

    def __getitem__(self, j):
        return self.values[j]

    def __len__(self):
        return len(self.values)

    @property
    def floats(self):
        return np.array([float(b) for b in self.values])


@lru_cache(maxsize=None)
def bernoulli_numbers(K):
    """Bernoulli numbers ``B_0 .. B_{2K}`` from the convolution recurrence.

    ``sum_{j=0}^{k} C(k+1, j) B_j = 0`` for ``k >= 1``, solved in exact
    rational arithmetic.

    Raises
    ------
    CapExceeded
        For ``K > 60``.
    """
    if int(K) != K or K < 0:
        raise InputError(f"K must be a non-negative integer, got {K!r}")
    if K > MAX_BERNOULLI_K:
        raise CapExceeded(f"K={K} exceeds the cap {MAX_BERNOULLI_K}")
    B = [Fraction(1)]
    for k in range(1, 2 * K + 1):
        B.append(-sum(math.comb(k + 1, j) * B[j] for j in range(k)) / (k + 1))
    return BernoulliTable(tuple(B), int(K))


# --------------------------------------------------------------------------
# parameters and scalar evaluation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RationalApproxParams:
    """Selects ``r_{n,m}``: ``n`` Bernoulli terms and ``m`` pole corrections."""

    n: int = 2
    m: int = 32
    bernoulli: BernoulliTable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or not 0 <= self.n <= MAX_N:
            raise InputError(f"n must be an integer in [0, {MAX_N}], got {self.n!r}")
        if int(self.m) != self.m or self.m < 1:
            raise InputError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "bernoulli", bernoulli_numbers(max(self.n, 1)))

    @property
    def poly_coefficients(self):
        """Exact ``B_{2(i+1)} / (2(i+1))!`` for ``i = 0 .. n-1``."""
        return [self.bernoulli[2 * (i + 1)] / math.factorial(2 * (i + 1))
                for i in range(self.n)]

    @property
    def sign(self):
        return -1 if self.n % 2 else 1


def _asarray(z):
    return np.asarray(z, dtype=np.complex128 if np.iscomplexobj(z) else np.float64)


def _out(v):
    return v[()] if np.ndim(v) == 0 else v


def f_n_eval(params, z):
    """Bernoulli partial sum ``f_n(z)``."""
    z = _asarray(z)
    z2 = z * z
    acc = np.zeros_like(z)
    for c in reversed(params.poly_coefficients):
        acc = (acc + float(c)) * z2
    return _out(1.0 - 0.5 * z + acc)


def _pole_check(z, m):
    k = np.rint(np.imag(z) / TWO_PI)
    near = (k >= 1) | (k <= -1)
    near &= np.abs(k) <= m
    near &= np.abs(z - 1j * TWO_PI * k) <= POLE_TOL
    if np.any(near):
        raise PoleHit(f"argument within {POLE_TOL} of a pole 2*pi*i*k with |k| <= {m}")


def r_nm_scalar(params, z):
    """Evaluate ``r_{n,m}(z)`` (scalar or array).

    Raises
    ------
    PoleHit
        When ``z`` lies within 1e-13 of ``+-2 pi i k``, ``1 <= k <= m``.
    """
    z = _asarray(z)
    _pole_check(z, params.m)
    n = params.n
    w2 = (z / TWO_PI) ** 2
    lead = w2 ** (n + 1)
    corr = np.zeros(np.broadcast(z, 1.0).shape, dtype=np.result_type(z, 1.0))
    for k in range(1, params.m + 1):
        corr = corr + lead * (float(k) ** (-2 * n)) / (w2 + k * k)
    return _out(f_n_eval(params, z) + 2.0 * params.sign * corr)


def psi1_scalar(z):
    """``psi_1(z) = 1/phi_1(z)`` in scalar arithmetic (reference)."""
    from .phi import phi_scalar

    return 1.0 / phi_scalar(1, z)


def psi1_squaring_scalar(z):
    """Both squaring forms of ``psi_1(2z)``.

    Returns ``(2 psi_1(z) / (e^z + 1), 2 psi_1(z)**2 / (z + 2 psi_1(z)))``.

    Raises
    ------
    DegenerateDenominator
        If ``e^z = -1``, ``z + 2 psi_1(z) = 0`` or ``psi_1`` has a pole at ``z``.
    """
    from .phi import phi_scalar

    z = _asarray(z)
    p1 = phi_scalar(1, z)
    den1 = np.exp(z) + 1.0
    if np.any(np.abs(p1) <= 1e-14) or np.any(np.abs(den1) <= 1e-14):
        raise DegenerateDenominator("e^z + 1 = 0 or psi_1 has a pole")
    psi = 1.0 / p1
    den2 = z + 2.0 * psi
    if np.any(np.abs(den2) <= 1e-14 * (1.0 + np.abs(z))):
        raise DegenerateDenominator("z + 2 psi_1(z) = 0")
    return _out(2.0 * psi / den1), _out(2.0 * psi * psi / den2)


# --------------------------------------------------------------------------
# shifted solves
# --------------------------------------------------------------------------

def fingerprint(A):
    h = hashlib.blake2b(digest_size=16)
    h.update(str((A.shape, A.dtype.str)).encode())
    h.update(np.ascontiguousarray(A).tobytes())
    return h.hexdigest()


def bandwidth(A):
    rows, cols = np.nonzero(A)
    if rows.size == 0:
        return 0
    return int(np.max(np.abs(rows - cols)))


class _SparseLU:
    def __init__(self, M, threshold):
        with np.errstate(all="ignore"):
            try:
                self.lu = scipy.sparse.linalg.splu(scipy.sparse.csc_matrix(M))
            except RuntimeError as exc:
                raise SingularMatrix(str(exc)) from exc
        piv = np.abs(self.lu.U.diagonal())
        if piv.min() <= threshold:
            raise SingularMatrix(f"pivot magnitude {piv.min():.3e} <= {threshold:.3e}")

    def solve(self, b):
        if np.iscomplexobj(b) and self.lu.U.dtype.kind != "c":
            return self.lu.solve(np.ascontiguousarray(b.real)) + 1j * self.lu.solve(
                np.ascontiguousarray(b.imag))
        return self.lu.solve(b)


class _DenseLU:
    def __init__(self, M):
        self.f = lu_factor(M)

    def solve(self, b):
        return lu_solve(self.f, b)


class ShiftedSolveWorkspace:
    """Factorizations of ``A^2 + (2 pi k)^2 I`` for ``k = 1 .. m``.

    Parameters
    ----------
    A : array_like
        Square matrix.
    m : int
        Number of shifts.
    mode : {"quadratic", "paired"}
        ``"quadratic"`` factors ``A^2 + (2 pi k)^2 I`` (real when ``A`` is
        real); ``"paired"`` factors ``A - 2 pi i k I`` and ``A + 2 pi i k I``
        and solves with both.
    banded : bool, optional
        Use sparse LU on the banded shifted matrices.  Default: automatic,
        when the bandwidth of ``A`` is small relative to its size.
    workers : int
        Threads used to build factorizations and run per-shift solves.  The
        results do not depend on it.

    After construction the workspace is read-only and may be shared.
    """

    def __init__(self, A, m, mode="quadratic", banded=None, workers=1):
        A = check_matrix(A)
        if int(m) != m or m < 1:
            raise InputError(f"m must be a positive integer, got {m!r}")
        if mode not in ("quadratic", "paired"):
            raise InputError(f"unknown mode {mode!r}")
        self.A = A
        self.n = A.shape[0]
        self.m = int(m)
        self.mode = mode
        self.fingerprint = fingerprint(A)
        self.workers = max(1, int(workers))
        p = bandwidth(A)
        if banded is None:
            banded = self.n >= 64 and 4 * p + 1 <= self.n // 4
        self.banded = bool(banded)
        self.shifts = [(TWO_PI * k) ** 2 for k in range(1, self.m + 1)]
        self._A2 = A @ A
        self._factors = self._map(self._factor, range(1, self.m + 1))

    def _map(self, fn, items):
        items = list(items)
        if self.workers == 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(self.workers) as pool:
            return list(pool.map(fn, items))

    def _lu(self, M):
        if self.banded:
            return _SparseLU(M, EPS * np.linalg.norm(M, np.inf) * self.n)
        return _DenseLU(M)

    def _factor(self, k):
        I = np.eye(self.n)
        try:
            if self.mode == "quadratic":
                return (self._lu(self._A2 + self.shifts[k - 1] * I),)
            s = 1j * TWO_PI * k
            return (self._lu(self.A - s * I), self._lu(self.A + s * I))
        except SingularMatrix as exc:
            raise SingularShift(
                f"A^2 + (2 pi {k})^2 I is numerically singular: the spectrum of A "
                f"touches +-2 pi i {k}") from exc

    def check(self, A):
        if A is self.A:
            return
        if fingerprint(check_matrix(A)) != self.fingerprint:
            raise InputError("workspace was built for a different matrix")

    def solve(self, b, k):
        """Solve ``(A^2 + (2 pi k)^2 I) z = b``."""
        f = self._factors[k - 1]
        if self.mode == "quadratic":
            return f[0].solve(b)
        return f[1].solve(f[0].solve(b))

    def solve_all(self, b):
        """Return ``[z_1, ..., z_m]`` in shift order."""
        return self._map(lambda k: self.solve(b, k), range(1, self.m + 1))

    def shifted_matvec(self, z, k):
        return self.A @ (self.A @ z) + self.shifts[k - 1] * z

    def residuals(self, b, zs):
        """Relative residual of each shifted system."""
        nb = np.linalg.norm(b)
        return [float(np.linalg.norm(self.shifted_matvec(z, k) - b) / nb)
                for k, z in enumerate(zs, 1)]


def _workspace(A, m, ws):
    if ws is None:
        return ShiftedSolveWorkspace(A, m)
    ws.check(A)
    if ws.m < m:
        raise InputError(f"workspace holds {ws.m} shifts, {m} needed")
    return ws


def shifted_solve_batch(A, b, m, ws=None):
    """Solve ``(A^2 + (2 pi k)^2 I) z_k = b`` for ``k = 1 .. m``.

    Factorizations are taken from (or stored in) ``ws`` and reused for any
    number of right-hand sides.

    Raises
    ------
    SingularShift
        If a shifted matrix is numerically singular.
    """
    A = check_matrix(A)
    b = check_vector(b, A.shape[0], allow_block=True)
    ws = _workspace(A, m, ws)
    return [ws.solve(b, k) for k in range(1, m + 1)]


# --------------------------------------------------------------------------
# action of r_{n,m}(A)
# --------------------------------------------------------------------------

def _psi1_apply_double(A, b, params, ws):
    n = params.n

    def a2(x):
        return A @ (A @ x)

    poly = np.zeros_like(b)
    coeffs = [float(c) for c in params.poly_coefficients]
    if n:
        poly = coeffs[-1] * b
        for c in reversed(coeffs[:-1]):
            poly = a2(poly) + c * b
        poly = a2(poly)
    out = b - 0.5 * (A @ b) + poly
    zs = ws.solve_all(b)
    acc = np.zeros_like(zs[0])
    for k, z in enumerate(zs[: params.m], 1):
        acc = acc + float(k) ** (-2 * n) * z
    for _ in range(n + 1):
        acc = a2(acc)
    return out + (2.0 * params.sign * TWO_PI ** (-2 * n)) * acc


def _dd_const(q):
    return dd.from_fraction(q)


def _refined_shift_solve(Ad, ws, b, k, s_q, max_refine=4):
    """Solve ``(A^2 + s I) z = b`` to double-double accuracy by refinement."""
    s_hi, s_lo = _dd_const(s_q)
    z_hi = ws.solve(b, k)
    z_lo = np.zeros_like(z_hi)
    for _ in range(max_refine):
        t_hi, t_lo = Ad.matvec(*Ad.matvec(z_hi, z_lo))
        u_hi, u_lo = dd.scale(z_hi, z_lo, s_hi, s_lo)
        t_hi, t_lo = dd.add(t_hi, t_lo, u_hi, u_lo)
        r_hi, r_lo = dd.add_double(-t_hi, -t_lo, b)
        c = ws.solve(r_hi + r_lo, k)
        z_hi, z_lo = dd.add_double(z_hi, z_lo, c)
        if np.linalg.norm(c) <= 2.0 ** -106 * np.linalg.norm(z_hi):
            break
    return z_hi, z_lo


def _psi1_apply_dd(A, b, params, ws):
    """``r_{n,m}(A) b`` as a double-double pair."""
    n = params.n
    Ad = dd.DDMatrix(A)

    def a2(x):
        return Ad.matvec(*Ad.matvec(*x))

    b = b.astype(np.result_type(A.dtype, b.dtype))
    zero = np.zeros_like(b)
    out = dd.add_double(*dd.scale(*Ad.matvec(b), -0.5), b)
    coeffs = [_dd_const(c) for c in params.poly_coefficients]
    if n:
        poly = dd.scale(b, zero, *coeffs[-1])
        for c in reversed(coeffs[:-1]):
            poly = dd.add(*a2(poly), *dd.scale(b, zero, *c))
        out = dd.add(*out, *a2(poly))
    acc = (zero, zero.copy())
    two_pi_q = 2 * PI_Q
    for k in range(1, params.m + 1):
        z = _refined_shift_solve(Ad, ws, b, k, (two_pi_q * k) ** 2)
        acc = dd.add(*acc, *dd.scale(*z, *_dd_const(Fraction(1, k ** (2 * n)))))
    for _ in range(n + 1):
        acc = a2(acc)
    coef = _dd_const(2 * params.sign / two_pi_q ** (2 * n))
    return dd.add(*out, *dd.scale(*acc, *coef))


def psi1_apply(A, b, params=None, ws=None, compensated=False):
    """Apply ``r_{n,m}(A) ~ psi_1(A)`` to a vector or block of columns.

    ``f_n(A) b`` is evaluated by Horner's rule in ``A^2`` with matrix-vector
    products only.  The pole corrections are accumulated as
    ``S = sum_k k^{-2n} z_k`` in the fixed order ``k = 1 .. m`` and then
    multiplied by ``A^{2(n+1)}`` through ``2(n+1)`` products; no matrix power
    is formed.

    Parameters
    ----------
    A : array_like
        Square matrix whose spectrum avoids ``+-2 pi i k``, ``k <= m``.
    b : array_like
        Vector of length ``N`` or ``N x k`` block.
    params : RationalApproxParams, optional
        Default ``(n, m) = (2, 32)``.
    ws : ShiftedSolveWorkspace, optional
        Reused factorizations; built on demand.
    compensated : bool
        Evaluate in double-double arithmetic (shifted solves refined to
        double-double accuracy) and round once at the end.

    Raises
    ------
    SingularShift
        Propagated from the shifted solves.
    """
    A = check_matrix(A)
    b = check_vector(b, A.shape[0], allow_block=True)
    params = params or RationalApproxParams()
    ws = _workspace(A, params.m, ws)
    if compensated:
        if b.ndim == 2:
            return np.stack([psi1_apply(A, b[:, j], params, ws, True)
                             for j in range(b.shape[1])], axis=1)
        return dd.to_double(*_psi1_apply_dd(A, b, params, ws))
    return _psi1_apply_double(A, b, params, ws)


def psi1_complement(A, v, params=None, ws=None, compensated=False):
    """Return ``v - r_{n,m}(A) v``.

    With ``compensated=True`` the difference is formed before the single
    final rounding, so it is accurate relative to its own size even when
    ``r_{n,m}(A) v`` nearly equals ``v``.
    """
    A = check_matrix(A)
    v = check_vector(v, A.shape[0], allow_block=True, name="v")
    params = params or RationalApproxParams()
    ws = _workspace(A, params.m, ws)
    if not compensated:
        return v - _psi1_apply_double(A, v, params, ws)
    if v.ndim == 2:
        return np.stack([psi1_complement(A, v[:, j], params, ws, True)
                         for j in range(v.shape[1])], axis=1)
    hi, lo = _psi1_apply_dd(A, v, params, ws)
    return dd.to_double(*dd.add_double(-hi, -lo, v))


def r_nm_matrix(A, params=None, ws=None):
    """Dense ``r_{n,m}(A)`` (columns of ``psi1_apply`` on the identity)."""
    A = check_matrix(A)
    return psi1_apply(A, np.eye(A.shape[0], dtype=A.dtype), params, ws)
