"""scikit-learn style wrappers.

The operator matrix ``A`` is the thing being fit; the vectors the operator
acts on are the samples.  ``transform(V)`` takes ``V`` of shape
``(n_samples, N)`` and returns ``f(A)`` applied to every row.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix
from .exceptions import DimensionMismatch
from .krylov import GmresConfig, psi2_apply
from .newton import NewtonConfig, newton_invert, psi_dense
from .phi import _order, phi_action, phi_matrices
from .psi1 import RationalApproxParams, ShiftedSolveWorkspace, psi1_apply


def _rows(self, V):
    V = np.asarray(V)
    if V.ndim == 1:
        V = V[None, :]
    if V.ndim != 2 or V.shape[1] != self.n_features_in_:
        raise DimensionMismatch(f"expected rows of length {self.n_features_in_}, got {V.shape}")
    return V


class PhiFunction(TransformerMixin, BaseEstimator):
    """Apply ``phi_ell(A)`` to row vectors."""

    def __init__(self, ell=1, compensated=False):
        self.ell = ell
        self.compensated = compensated

    def fit(self, A, y=None):
        _order(self.ell)
        self.A_ = check_matrix(A)
        self.n_features_in_ = self.A_.shape[0]
        return self

    def transform(self, V):
        check_is_fitted(self, "A_")
        V = _rows(self, V)
        return phi_action(self.ell, self.A_, V.T, compensated=self.compensated).T


class Psi1Approximant(TransformerMixin, BaseEstimator):
    """Apply the rational approximation ``r_{n,m}(A)`` of ``psi_1(A)``.

    ``fit`` factors the ``m`` shifted matrices once; ``transform`` reuses them.
    """

    def __init__(self, n=2, m=32, compensated=False):
        self.n = n
        self.m = m
        self.compensated = compensated

    def fit(self, A, y=None):
        self.A_ = check_matrix(A)
        self.params_ = RationalApproxParams(self.n, self.m)
        self.workspace_ = ShiftedSolveWorkspace(self.A_, self.m)
        self.n_features_in_ = self.A_.shape[0]
        return self

    def transform(self, V):
        check_is_fitted(self, "workspace_")
        V = _rows(self, V)
        return psi1_apply(self.A_, V.T, self.params_, self.workspace_, self.compensated).T


class Psi2Solver(TransformerMixin, BaseEstimator):
    """Solve ``phi_2(A) x = b`` by preconditioned GMRES for each row ``b``.

    ``reports_`` holds the solve report of the last ``transform`` call, one
    per row.
    """

    def __init__(self, n=2, m=32, tol=1e-12, maxit=60, compensated=False):
        self.n = n
        self.m = m
        self.tol = tol
        self.maxit = maxit
        self.compensated = compensated

    def fit(self, A, y=None):
        self.A_ = check_matrix(A)
        self.params_ = RationalApproxParams(self.n, self.m)
        self.config_ = GmresConfig(tol=self.tol, maxit=self.maxit)
        self.workspace_ = ShiftedSolveWorkspace(self.A_, self.m)
        self.n_features_in_ = self.A_.shape[0]
        return self

    def transform(self, V):
        check_is_fitted(self, "workspace_")
        V = _rows(self, V)
        out, self.reports_ = [], []
        for v in V:
            x, rep = psi2_apply(self.A_, v, self.params_, self.config_, self.compensated,
                                ws=self.workspace_)
            out.append(x)
            self.reports_.append(rep)
        return np.array(out)


class NewtonPsiInverter(TransformerMixin, BaseEstimator):
    """Dense ``psi_{ell}(A)`` by Newton-Schulz from ``psi_{ell-1}(A)``.

    ``fit`` computes ``inverse_`` (``ell`` is 2 by default, started from the
    LU inverse of ``phi_1(A)``); ``transform`` multiplies rows by it.
    """

    def __init__(self, ell=2, tol=1e-12, maxit=30, compensated=False):
        self.ell = ell
        self.tol = tol
        self.maxit = maxit
        self.compensated = compensated

    def fit(self, A, y=None):
        A = check_matrix(A)
        ell = _order(self.ell, cap=3).ell
        if ell < 2:
            raise ValueError("ell must be 2 or 3; use psi_dense for psi_1")
        X0 = psi_dense(A, ell - 1)
        B = phi_matrices(A, ell)[ell]
        self.inverse_, self.report_ = newton_invert(
            B, X0, NewtonConfig(tol=self.tol, maxit=self.maxit), compensated=self.compensated)
        self.n_features_in_ = A.shape[0]
        return self

    def transform(self, V):
        check_is_fitted(self, "inverse_")
        V = _rows(self, V)
        return V @ self.inverse_.T
