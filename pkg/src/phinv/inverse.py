"""Inverse problems whose solution requires ``psi_2(A)`` applied to a vector.

Two-point parameter recovery
    ``u' = A u + p`` on ``[0, 1]`` with ``u(0) = q`` gives
    ``g = u(1) = e^A q + phi_2(A) p`` for a source linear in time, so
    ``p = psi_2(A) (g - e^A q)``.

Nonlocal source recovery
    With ``u(T) = u_1`` known through an integral condition,
    ``u_1 = phi_1(TA) u_0 + T phi_2(TA) g`` and
    ``g = psi_2(TA) (u_1 - phi_1(TA) u_0) / T``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_matrix, check_vector
from .exceptions import InputError, SingularMatrix
from .krylov import GmresConfig, SolveReport, psi2_apply
from .phi import phi_action, phi_matrix
from .psi1 import RationalApproxParams
from .testmatrices import tridiag


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the preconditioned GMRES solve used by the inverse problems."""

    n: int = 2
    m: int = 32
    tol: float = 1e-10
    maxit: int = 40
    compensated: bool = False

    @property
    def params(self):
        return RationalApproxParams(self.n, self.m)

    @property
    def gmres(self):
        return GmresConfig(tol=self.tol, maxit=self.maxit)


@dataclass
class TwoPointProblem:
    A: np.ndarray
    q: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        self.A = check_matrix(self.A)
        n = self.A.shape[0]
        self.q = check_vector(self.q, n, name="q")
        self.g = check_vector(self.g, n, name="g")


@dataclass
class NonlocalProblem:
    A: np.ndarray
    T: float
    u0: np.ndarray
    u1: np.ndarray

    def __post_init__(self):
        self.A = check_matrix(self.A)
        if not (np.isfinite(self.T) and self.T > 0):
            raise InputError("T must be finite and positive")
        n = self.A.shape[0]
        self.u0 = check_vector(self.u0, n, name="u0")
        self.u1 = check_vector(self.u1, n, name="u1")


@dataclass
class HeatDiscretization:
    """Finite differences for ``u_t = e^{z-4} u_zz / sigma^2`` type problems on ``(-1, 1)``.

    Grid ``z_i = -1 + 2i/(N+1)``, ``i = 1 .. N`` (homogeneous Dirichlet
    boundary), and ``A = ((N+1)/(2 sigma))^2 diag(e^{z_i - 4}) tridiag(1, -2, 1)``.
    ``A`` is a positive diagonal times a symmetric negative definite matrix,
    hence similar to a symmetric negative definite matrix.
    """

    N: int
    sigma: float = 10.0
    z: np.ndarray = field(init=False, repr=False)
    A: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8:
            raise InputError("N must be an integer >= 8")
        if not self.sigma > 0:
            raise InputError("sigma must be positive")
        N = self.N
        self.z = -1.0 + 2.0 * np.arange(1, N + 1) / (N + 1)
        self.coef = ((N + 1) / (2.0 * self.sigma)) ** 2 * np.exp(self.z - 4.0)
        self.A = self.coef[:, None] * tridiag(N, 1.0, -2.0, 1.0)

    def symmetric_form(self):
        """``D^{1/2} L D^{1/2}``, similar to ``A = D L``."""
        s = np.sqrt(self.coef)
        return s[:, None] * tridiag(self.N, 1.0, -2.0, 1.0) * s[None, :]

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.symmetric_form())


def two_point_forward(A, q, p):
    """``e^A q + phi_2(A) p``."""
    return phi_action(0, A, q) + phi_action(2, A, p)


def nonlocal_forward(A, T, u0, g):
    """``phi_1(TA) u_0 + T phi_2(TA) g``."""
    TA = T * np.asarray(A)
    return phi_action(1, TA, u0) + T * phi_action(2, TA, g)


def _psi2(A, rhs, cfg):
    """``psi_2(A) rhs`` by preconditioned GMRES, or a dense ``phi_2(A)`` solve for singular ``A``.

    The GMRES operator needs ``A^{-1}``; ``phi_2(A)`` itself stays invertible
    when ``A`` is singular, so small singular cases are solved directly.
    """
    try:
        return psi2_apply(A, rhs, cfg.params, cfg.gmres, cfg.compensated)
    except SingularMatrix as exc:
        if type(exc) is not SingularMatrix:
            raise
    P2 = phi_matrix(2, A)
    x = np.linalg.solve(P2, rhs)
    beta = float(np.linalg.norm(rhs))
    res = float(np.linalg.norm(P2 @ x - rhs))
    rel = res / beta if beta else 0.0
    rep = SolveReport(0, [beta, res], True, beta, 0, rel, cfg.tol, rhs=rhs)
    return x, rep


def solve_two_point(prob, cfg=None):
    """Recover ``p = psi_2(A) (g - e^A q)``.

    Returns
    -------
    p : ndarray
    report : SolveReport
    """
    cfg = cfg or SolverConfig()
    rhs = prob.g
    if np.any(prob.q):
        rhs = prob.g - phi_action(0, prob.A, prob.q)
    return _psi2(prob.A, rhs, cfg)


def solve_nonlocal(prob, cfg=None):
    """Recover ``g = psi_2(TA) (u_1 - phi_1(TA) u_0) / T``."""
    cfg = cfg or SolverConfig()
    TA = prob.T * prob.A
    rhs = prob.u1 - phi_action(1, TA, prob.u0)
    x, rep = _psi2(TA, rhs, cfg)
    return x / prob.T, rep


@dataclass
class HeatResult:
    z: np.ndarray
    f_true: np.ndarray
    f_hat: np.ndarray
    report: object

    @property
    def error(self):
        return np.abs(self.f_hat - self.f_true)

    @property
    def max_error(self):
        return float(np.max(self.error))


def heat_inverse_experiment(N, sigma=10.0, cfg=None, source=None):
    """Round-trip recovery of a source term for the heat discretization.

    A synthetic source ``f(z) = sin(2 pi z)`` (or ``source(z)``) is pushed
    through the dense forward map ``h = phi_2(A) f`` (zero initial state)
    and recovered with :func:`solve_two_point`.
    """
    heat = HeatDiscretization(N, sigma)
    f = np.sin(2 * np.pi * heat.z) if source is None else np.asarray(source(heat.z), float)
    h = phi_matrix(2, heat.A) @ f
    prob = TwoPointProblem(heat.A, np.zeros(N), h)
    f_hat, rep = solve_two_point(prob, cfg or SolverConfig())
    return HeatResult(heat.z, f, np.real_if_close(f_hat), rep)
