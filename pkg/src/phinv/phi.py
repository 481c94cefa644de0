"""Scalar and matrix phi-functions.

``phi_l(z) = sum_k z**k / (k + l)!`` with ``phi_0 = exp``, linked by
``phi_l(z) = z * phi_{l+1}(z) + 1/l!``.

Matrix values come from scaling and squaring on the first block row of the
exponential of the block-companion augmentation

    [[A, I, 0, ...],
     [0, 0, I, ...],
     [      ...   ]]

whose first block row is ``[exp(A), phi_1(A), ..., phi_l(A)]``.  Vector
actions use the ``(N + l)``-dimensional augmentation with a stepped Taylor
kernel and never form a matrix function.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import dd
from ._validation import check_matrix, check_vector
from .exceptions import DimensionMismatch, InputError, QuadratureStagnation

MAX_PUBLIC_ELL = 3
EPS = np.finfo(np.float64).eps
# just below the unit roundoff 2**-53; smaller tolerances cannot be resolved
TAYLOR_TOL_FLOOR = 1e-16


@dataclass(frozen=True)
class PhiOrder:
    """The index ``l >= 0`` of a phi-function with its cached ``1/l!``."""

    ell: int

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 0:
            raise InputError(f"phi order must be a non-negative integer, got {self.ell!r}")
        object.__setattr__(self, "ell", int(self.ell))

    @property
    def inv_factorial(self):
        return float(Fraction(1, math.factorial(self.ell)))

    def __index__(self):
        return self.ell


def _order(ell, cap=MAX_PUBLIC_ELL):
    ell = PhiOrder(ell.ell if isinstance(ell, PhiOrder) else ell)
    if cap is not None and ell.ell > cap:
        raise InputError(f"phi order {ell.ell} exceeds the supported maximum {cap}")
    return ell


@dataclass(frozen=True)
class PhiEvalConfig:
    """Evaluation knobs.

    Parameters
    ----------
    taylor_tol : float
        Truncation tolerance of every Taylor sum, relative to the leading term.
    scaling_threshold : float
        Matrices are scaled by ``2**-s`` until ``||A||_1`` is at most this.
    max_terms : int
        Hard cap on Taylor terms.
    """

    taylor_tol: float = 1e-16
    scaling_threshold: float = 0.5
    max_terms: int = 60

    def __post_init__(self):
        if not self.taylor_tol >= TAYLOR_TOL_FLOOR:
            raise InputError(f"taylor_tol must be at least {TAYLOR_TOL_FLOOR}")
        if self.max_terms < 8:
            raise InputError("max_terms must be at least 8")
        if not self.scaling_threshold > 0:
            raise InputError("scaling_threshold must be positive")


DEFAULT_CONFIG = PhiEvalConfig()


def _taylor_terms(radius, ell, cfg):
    """Number of Taylor terms so that the tail at ``|z| <= radius`` is below tolerance."""
    lead = 1.0 / math.factorial(ell)
    term = lead
    for k in range(1, cfg.max_terms + 1):
        term *= radius / (k + ell)
        if term <= cfg.taylor_tol * lead * 0.5:
            return k
    return cfg.max_terms


# --------------------------------------------------------------------------
# scalar
# --------------------------------------------------------------------------

def _phi_scalar_all(ell, z, cfg=DEFAULT_CONFIG):
    """Return ``[phi_0(z), ..., phi_ell(z)]`` for an array ``z`` (any ``ell``)."""
    z = np.asarray(z, dtype=np.complex128 if np.iscomplexobj(z) else np.float64)
    out = [None] * (ell + 1)
    small = np.abs(z) < 1.0
    # Taylor on |z| < 1: Horner for the top order, then lift with the recurrence
    K = _taylor_terms(1.0, ell, cfg)
    zs = np.where(small, z, 0)
    top = np.full(z.shape, 1.0 / math.factorial(K + ell), dtype=z.dtype)
    for k in range(K - 1, -1, -1):
        top = top * zs + 1.0 / math.factorial(k + ell)
    small_vals = [None] * (ell + 1)
    small_vals[ell] = top
    for j in range(ell - 1, -1, -1):
        small_vals[j] = zs * small_vals[j + 1] + 1.0 / math.factorial(j)
    # |z| >= 1: exp/expm1 and the recurrence solved for the next order
    with np.errstate(all="ignore"):
        zl = np.where(small, 1.0, z)
        large_vals = [np.exp(zl)]
        if ell >= 1:
            large_vals.append(np.expm1(zl) / zl)
        for j in range(1, ell):
            large_vals.append((large_vals[j] - 1.0 / math.factorial(j)) / zl)
    for j in range(ell + 1):
        out[j] = np.where(small, small_vals[j], large_vals[j])
    return out


def phi_scalar(ell, z, cfg=None):
    """Evaluate ``phi_ell`` at a scalar or array ``z``.

    For ``|z| < 1`` a truncated Taylor sum is used; otherwise ``phi_0 = exp``,
    ``phi_1 = expm1(z)/z`` and ``phi_{j+1} = (phi_j - 1/j!)/z``, which is
    cancellation-safe once ``|z| >= 1``.

    Examples
    --------
    >>> float(phi_scalar(2, 1.0))
    0.7182818284590452
    """
    ell = _order(ell)
    vals = _phi_scalar_all(ell.ell, z, cfg or DEFAULT_CONFIG)[ell.ell]
    return vals[()] if np.ndim(vals) == 0 else vals


def phi_integral_oracle(ell, z, rtol=1e-13, order=20, max_depth=40):
    """``phi_ell(z)`` by adaptive Gauss-Legendre quadrature (test oracle).

    Integrates ``exp((1 - t) z) t**(ell - 1) / (ell - 1)!`` over ``[0, 1]``.
    Panels are bisected until an ``order``-point and a ``2*order``-point rule
    agree to ``rtol`` relative to the integral of the absolute integrand.

    Raises
    ------
    QuadratureStagnation
        When a panel still fails after ``max_depth`` bisections.
    """
    ell = _order(ell, cap=None).ell
    if ell < 1:
        raise InputError("the integral representation needs ell >= 1")
    z = complex(z)
    c = 1.0 / math.factorial(ell - 1)
    x1, w1 = np.polynomial.legendre.leggauss(order)
    x2, w2 = np.polynomial.legendre.leggauss(2 * order)

    def f(t):
        return c * np.exp((1.0 - t) * z) * t ** (ell - 1)

    def rule(a, b, x, w):
        t = 0.5 * (b - a) * x + 0.5 * (a + b)
        return 0.5 * (b - a) * np.dot(w, f(t))

    # scale: integral of |f| on a fixed composite rule
    edges = np.linspace(0.0, 1.0, 65)
    scale = sum(abs(0.5 * (b - a)) * np.dot(w2, np.abs(f(0.5 * (b - a) * x2 + 0.5 * (a + b))))
                for a, b in zip(edges[:-1], edges[1:]))
    tol = rtol * max(scale, np.finfo(float).tiny)

    total = 0.0 + 0.0j
    stack = [(0.0, 1.0, 0)]
    while stack:
        a, b, depth = stack.pop()
        coarse = rule(a, b, x1, w1)
        fine = rule(a, b, x2, w2)
        if abs(fine - coarse) <= tol * (b - a):
            total += fine
        elif depth >= max_depth:
            raise QuadratureStagnation(
                f"no convergence on [{a}, {b}] after {depth} bisections")
        else:
            m = 0.5 * (a + b)
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
    return total


# --------------------------------------------------------------------------
# matrix
# --------------------------------------------------------------------------

def _phi_block_row(A, ell, cfg):
    """``[phi_0(A), ..., phi_ell(A)]`` by scaling and squaring."""
    n = A.shape[0]
    I = np.eye(n, dtype=A.dtype)
    norm = np.linalg.norm(A, 1)
    s = 0
    if norm > cfg.scaling_threshold:
        s = int(math.ceil(math.log2(norm / cfg.scaling_threshold)))
    X = A / (2.0 ** s)
    K = _taylor_terms(min(norm, cfg.scaling_threshold), ell, cfg)
    P = [None] * (ell + 1)
    top = I / math.factorial(K + ell)
    for k in range(K - 1, -1, -1):
        top = X @ top + I / math.factorial(k + ell)
    P[ell] = top
    for j in range(ell - 1, -1, -1):
        P[j] = X @ P[j + 1] + I / math.factorial(j)
    inv_fact = [1.0 / math.factorial(i) for i in range(ell + 1)]
    for _ in range(s):
        # phi_j(2X) = 2**-j (phi_0(X) phi_j(X) + sum_{i=1}^j phi_i(X) / (j - i)!)
        new = []
        for j in range(ell + 1):
            acc = P[0] @ P[j]
            for i in range(1, j + 1):
                acc = acc + inv_fact[j - i] * P[i]
            new.append(acc / (2.0 ** j))
        P = new
    return P


def _phi_taylor_direct(A, ell, cfg):
    norm = np.linalg.norm(A, 1)
    if norm > 1.0:
        raise InputError("direct Taylor path requires ||A||_1 <= 1")
    n = A.shape[0]
    I = np.eye(n, dtype=A.dtype)
    K = _taylor_terms(max(norm, 1e-300), ell, cfg)
    S = I / math.factorial(ell)
    term = I / math.factorial(ell)
    for k in range(1, K + 1):
        term = (A @ term) / (k + ell)
        S = S + term
    return S


def phi_matrices(A, ell, cfg=None):
    """Return ``[phi_0(A), phi_1(A), ..., phi_ell(A)]``."""
    ell = _order(ell).ell
    A = check_matrix(A)
    return _phi_block_row(A, ell, cfg or DEFAULT_CONFIG)


def phi_matrix(ell, A, cfg=None, method="augmented"):
    """Evaluate ``phi_ell(A)`` for a square matrix.

    Parameters
    ----------
    ell : int or PhiOrder
        Order, ``0 <= ell <= 3``.
    A : array_like
        Square matrix.
    cfg : PhiEvalConfig, optional
    method : {"augmented", "taylor"}
        ``"augmented"`` (default) uses scaling and squaring of the augmented
        exponential; ``"taylor"`` sums the Taylor series directly and is only
        accepted for ``||A||_1 <= 1``.
    """
    ell = _order(ell).ell
    A = check_matrix(A)
    cfg = cfg or DEFAULT_CONFIG
    if method == "augmented":
        return _phi_block_row(A, ell, cfg)[ell]
    if method == "taylor":
        return _phi_taylor_direct(A, ell, cfg)
    raise InputError(f"unknown method {method!r}")


def phi_recurrence_lift(ell, phi_next, A):
    """Return ``phi_ell(A) = A @ phi_{ell+1}(A) + I/ell!``."""
    ell = _order(ell, cap=None)
    A = check_matrix(A)
    phi_next = check_matrix(phi_next, name="phi_next")
    if phi_next.shape != A.shape:
        raise DimensionMismatch(f"shapes differ: {phi_next.shape} vs {A.shape}")
    return A @ phi_next + ell.inv_factorial * np.eye(A.shape[0])


# --------------------------------------------------------------------------
# vector action
# --------------------------------------------------------------------------

def _augment(A, v, ell):
    n = A.shape[0]
    dtype = np.result_type(A.dtype, v.dtype)
    M = np.zeros((n + ell, n + ell), dtype=dtype)
    M[:n, :n] = A
    M[:n, n] = v
    for i in range(ell - 1):
        M[n + i, n + i + 1] = 1.0
    start = np.zeros(n + ell, dtype=dtype)
    start[-1] = 1.0
    return M, start


def expm_action(M, b, cfg=None, theta=1.0):
    """``exp(M) b`` by a stepped truncated Taylor series.

    The argument is split into ``s`` steps with ``||M/s||_1 <= theta`` and
    each step sums Taylor terms until two consecutive terms fall below
    ``taylor_tol`` relative to the partial sum.
    """
    cfg = cfg or DEFAULT_CONFIG
    norm = np.linalg.norm(M, 1)
    steps = max(1, int(math.ceil(norm / theta)))
    Ms = M / steps
    x = np.array(b, dtype=np.result_type(M.dtype, b.dtype), copy=True)
    for _ in range(steps):
        term = x
        acc = x.copy()
        prev = np.inf
        for k in range(1, cfg.max_terms + 1):
            term = (Ms @ term) / k
            acc = acc + term
            tn = np.linalg.norm(term)
            if max(tn, prev) <= cfg.taylor_tol * np.linalg.norm(acc):
                break
            prev = tn
        x = acc
    return x


def _phi_action_dd(ell, A, v, max_norm=30.0, max_terms=200):
    """``phi_ell(A) v`` as a double-double pair by the plain Taylor series."""
    if np.linalg.norm(A, 1) > max_norm:
        raise InputError(f"compensated phi action supports ||A||_1 <= {max_norm}")
    Ad = dd.DDMatrix(A)
    y_hi = np.array(v, dtype=np.result_type(A.dtype, v.dtype), copy=True)
    y_lo = np.zeros_like(y_hi)
    c_hi, c_lo = dd.from_fraction(Fraction(1, math.factorial(ell)))
    s_hi, s_lo = dd.scale(y_hi, y_lo, c_hi, c_lo)
    biggest = np.linalg.norm(s_hi)
    for k in range(1, max_terms + 1):
        y_hi, y_lo = Ad.matvec(y_hi, y_lo)
        c_hi, c_lo = dd.from_fraction(Fraction(1, math.factorial(k + ell)))
        t_hi, t_lo = dd.scale(y_hi, y_lo, c_hi, c_lo)
        s_hi, s_lo = dd.add(s_hi, s_lo, t_hi, t_lo)
        tn = np.linalg.norm(t_hi)
        biggest = max(biggest, tn)
        if tn <= 2.0 ** -110 * biggest and k > ell + 2:
            return s_hi, s_lo
    raise InputError("compensated phi action did not converge")


def phi_action(ell, A, v, cfg=None, compensated=False):
    """Return ``phi_ell(A) v`` without forming ``phi_ell(A)``.

    The default path applies the exponential of the ``(N + ell)`` augmented
    matrix ``[[A, W], [0, J]]`` (``W = [v, 0, ...]``, ``J`` the nilpotent
    shift) to the last unit vector.  ``compensated=True`` sums the Taylor
    series in double-double arithmetic instead; it is meant for moderate
    ``||A||_1`` where the result suffers heavy cancellation.
    """
    ell = _order(ell).ell
    A = check_matrix(A)
    v = check_vector(v, A.shape[0], name="v", allow_block=True)
    if v.ndim == 2:
        cols = [phi_action(ell, A, v[:, j], cfg, compensated) for j in range(v.shape[1])]
        return np.stack(cols, axis=1)
    if compensated:
        return dd.to_double(*_phi_action_dd(ell, A, v))
    if ell == 0:
        return expm_action(A, v, cfg)
    M, start = _augment(A, v, ell)
    return expm_action(M, start, cfg)[: A.shape[0]]
