"""Double-double (compensated) arithmetic on NumPy arrays.

A double-double value is a pair ``(hi, lo)`` of arrays with ``|lo| <= ulp(hi)/2``
representing ``hi + lo``; complex values keep the pair per component.  Errors
of the basic operations are of order ``eps**2`` relative to the operand
magnitudes, which is what the cancellation-prone evaluations in this package
need (an operand of size 10 summing to 1e-8 still keeps 16 correct digits).

Only the handful of kernels those evaluations use are provided: sums,
products, scaling, a dense matrix-vector (or matrix-block) product with a
pairwise summation tree, and rounding back to double.  The error-free
transformations assume no underflow or overflow in the partial products
(magnitudes roughly within ``1e-290 .. 1e290``).
"""

from fractions import Fraction

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    """Error-free sum: ``a + b == s + e`` exactly (componentwise for complex)."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def split(a):
    """Dekker split of a real array into two 26-bit halves."""
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _tp(a, ah, al, b, bh, bl):
    p = a * b
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _cplx(re, im):
    out = np.empty(np.broadcast(re, im).shape, dtype=np.complex128)
    out.real = re
    out.imag = im
    return out


class _Split:
    """Cached Dekker splits of the real and imaginary parts of an array."""

    def __init__(self, a):
        a = np.asarray(a)
        self.is_complex = a.dtype.kind == "c"
        self.re = np.ascontiguousarray(a.real, dtype=np.float64)
        self.re_h, self.re_l = split(self.re)
        if self.is_complex:
            self.im = np.ascontiguousarray(a.imag)
            self.im_h, self.im_l = split(self.im)


def _two_prod_split(sa, sb):
    if not (sa.is_complex or sb.is_complex):
        return _tp(sa.re, sa.re_h, sa.re_l, sb.re, sb.re_h, sb.re_l)
    p1, e1 = _tp(sa.re, sa.re_h, sa.re_l, sb.re, sb.re_h, sb.re_l)
    if sa.is_complex and sb.is_complex:
        p2, e2 = _tp(sa.im, sa.im_h, sa.im_l, sb.im, sb.im_h, sb.im_l)
        p3, e3 = _tp(sa.re, sa.re_h, sa.re_l, sb.im, sb.im_h, sb.im_l)
        p4, e4 = _tp(sa.im, sa.im_h, sa.im_l, sb.re, sb.re_h, sb.re_l)
        rh, rl = two_sum(p1, -p2)
        rh, rl = two_sum(rh, rl + (e1 - e2))
        ih, il = two_sum(p3, p4)
        ih, il = two_sum(ih, il + (e3 + e4))
        return _cplx(rh, ih), _cplx(rl, il)
    # exactly one complex operand: both components are plain real products
    c = sa if sa.is_complex else sb
    r = sb if sa.is_complex else sa
    p2, e2 = _tp(c.im, c.im_h, c.im_l, r.re, r.re_h, r.re_l)
    return _cplx(p1, p2), _cplx(e1, e2)


def two_prod(a, b):
    """Error-free product of float or complex arrays (complex: error ~eps**2)."""
    return _two_prod_split(_Split(a), _Split(b))


def add(a_hi, a_lo, b_hi, b_lo):
    """Double-double addition."""
    s, e = two_sum(a_hi, b_hi)
    t, f = two_sum(a_lo, b_lo)
    s, e = two_sum(s, e + t)
    return two_sum(s, e + f)


def add_double(a_hi, a_lo, b):
    s, e = two_sum(a_hi, b)
    return two_sum(s, e + a_lo)


def scale(hi, lo, c_hi, c_lo=0.0):
    """Multiply a double-double array by a double-double scalar."""
    p, e = two_prod(hi, c_hi)
    return two_sum(p, e + (lo * c_hi + hi * c_lo))


def mul(a_hi, a_lo, b_hi, b_lo):
    """Elementwise double-double product."""
    p, e = two_prod(a_hi, b_hi)
    return two_sum(p, e + (a_hi * b_lo + a_lo * b_hi))


def sum_last(hi, lo):
    """Pairwise double-double sum over the last axis."""
    while hi.shape[-1] > 1:
        if hi.shape[-1] % 2:
            pad = [(0, 0)] * (hi.ndim - 1) + [(0, 1)]
            hi = np.pad(hi, pad)
            lo = np.pad(lo, pad)
        hi, lo = add(hi[..., 0::2], lo[..., 0::2], hi[..., 1::2], lo[..., 1::2])
    return hi[..., 0], lo[..., 0]


def to_double(hi, lo):
    return hi + lo


def from_fraction(q):
    """Nearest double-double to a rational number."""
    q = Fraction(q)
    hi = float(q)
    return hi, float(q - Fraction(hi))


class DDMatrix:
    """A double matrix whose products with double-double data are compensated.

    ``matvec(x_hi, x_lo)`` returns ``A @ (x_hi + x_lo)`` to roughly
    ``eps**2 * |A| @ |x|`` absolute accuracy.  ``x`` may be a vector or an
    ``N x k`` block of columns.
    """

    def __init__(self, A):
        self.A = np.asarray(A)
        self._split = _Split(self.A)
        self.n = self.A.shape[0]

    def _exact_products(self, x):
        # rows of A against one vector: (N, N) array of exact products
        return _two_prod_split(self._split, _Split(x[None, :]))

    def matvec(self, x_hi, x_lo=None):
        x_hi = np.asarray(x_hi)
        if x_lo is None:
            x_lo = np.zeros_like(x_hi)
        if x_hi.ndim == 2:
            cols = [self.matvec(x_hi[:, j], x_lo[:, j]) for j in range(x_hi.shape[1])]
            return (np.stack([c[0] for c in cols], axis=1),
                    np.stack([c[1] for c in cols], axis=1))
        p, e = self._exact_products(x_hi)
        s_hi, s_lo = sum_last(p, e)
        return two_sum(s_hi, s_lo + self.A @ x_lo)
