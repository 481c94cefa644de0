"""Deterministic test matrices used by the experiments."""

import cmath
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import InvalidSpec

KINDS = ("toeplitz_tridiag", "itnew1", "itnew2", "laplacian1d", "q1_2d", "heat")


def tridiag(n, sub, diag, sup):
    return (np.diag(np.full(n, float(diag)))
            + np.diag(np.full(n - 1, float(sub)), -1)
            + np.diag(np.full(n - 1, float(sup)), 1))


@lru_cache(maxsize=None)
def itnew2_roots(seed=2.09 + 7.46j, tol=1e-13, maxit=100):
    """The nonzero root pair of ``e^z = 1 + z`` nearest the origin.

    These are the first zeros of ``phi_2`` (poles of ``psi_2``).  Found by a
    damped Newton iteration on ``F(z) = e^z - 1 - z`` and returned as
    ``(z, conj(z))`` with ``Im z > 0``.
    """
    z = complex(seed)
    F = cmath.exp(z) - 1 - z
    for _ in range(maxit):
        step = F / (cmath.exp(z) - 1)
        lam = 1.0
        while True:
            z_new = z - lam * step
            F_new = cmath.exp(z_new) - 1 - z_new
            if abs(F_new) < abs(F) or lam < 1e-6:
                break
            lam *= 0.5
        if z_new == z:
            break
        z, F = z_new, F_new
        if abs(F) <= tol * 1e-2:
            break
    if abs(cmath.exp(z) - 1 - z) > tol:
        raise InvalidSpec(f"root refinement failed: |F| = {abs(F):.3e}")
    if z.imag < 0:
        z = z.conjugate()
    return z, z.conjugate()


@dataclass(frozen=True)
class TestMatrixSpec:
    """Parameters of a test matrix.

    Parameters
    ----------
    kind : str
        One of ``toeplitz_tridiag`` (``(N^2/h) tridiag(0.5, 0, -0.5)``),
        ``itnew1`` (cyclic down-shift plus ``epsilon e e^T``), ``itnew2``
        (diagonal of alternating zeros of ``phi_2`` plus ``epsilon e e^T``),
        ``laplacian1d`` (``tridiag(1, -2, 1)/h``), ``q1_2d`` (the Q1
        finite-element block matrix with blocks of size ``block``) and
        ``heat`` (the scaled variable-coefficient heat matrix).
    """

    __test__ = False  # not a pytest class

    kind: str
    N: int
    epsilon: float = 0.0
    h: float = 1.0
    block: int = 16
    sigma: float = 10.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidSpec("N must be a positive integer")
        if self.kind in ("toeplitz_tridiag", "laplacian1d") and not self.h > 0:
            raise InvalidSpec("h must be positive")
        if self.kind == "q1_2d" and self.block ** 2 != self.N:
            raise InvalidSpec(f"q1_2d needs N = block**2, got N={self.N}, block={self.block}")
        if self.kind == "heat" and (self.N < 8 or not self.sigma > 0):
            raise InvalidSpec("heat needs N >= 8 and sigma > 0")
        if not np.isfinite(self.epsilon):
            raise InvalidSpec("epsilon must be finite")


def build_matrix(spec):
    """Build the dense matrix described by ``spec`` (bit-for-bit deterministic)."""
    N = spec.N
    kind = spec.kind
    if kind == "toeplitz_tridiag":
        return (N * N / spec.h) * tridiag(N, 0.5, 0.0, -0.5)
    if kind == "itnew1":
        Z = np.zeros((N, N))
        Z[np.arange(1, N), np.arange(N - 1)] = 1.0
        Z[0, N - 1] = 1.0
        return Z + spec.epsilon * np.ones((N, N))
    if kind == "itnew2":
        z, zc = itnew2_roots()
        d = np.array([z if i % 2 == 0 else zc for i in range(N)])
        return np.diag(d) + spec.epsilon * np.ones((N, N))
    if kind == "laplacian1d":
        return tridiag(N, 1.0, -2.0, 1.0) / spec.h
    if kind == "q1_2d":
        b = spec.block
        M = tridiag(b, 1.0, -8.0, 1.0)
        Nb = tridiag(b, 1.0, 1.0, 1.0)
        T = tridiag(b, 1.0, 0.0, 1.0)
        return (np.kron(np.eye(b), M) + np.kron(T, Nb)) / 3.0
    if kind == "heat":
        from .inverse import HeatDiscretization

        return HeatDiscretization(N, spec.sigma).A
    raise InvalidSpec(kind)  # pragma: no cover


def toeplitz_eigenvalues(N, h):
    """Eigenvalues ``i (N^2/h) cos(k pi/(N+1))`` of the skew Toeplitz test matrix."""
    k = np.arange(1, N + 1)
    return 1j * (N * N / h) * np.cos(k * np.pi / (N + 1))
