import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phinv.exceptions import (InputError, MaxitReached, NotNormal, SingularHessenbergPhi,
                              Stagnation)
from phinv.experiments import tnew_problem
from phinv.krylov import (GmresConfig, arnoldi_psi2_baseline, gmres, gmres_bound_check,
                          psi2_apply, psi2_operator, spectral_map_rho)
from phinv.newton import NewtonConfig, newton_invert, psi_dense
from phinv.phi import phi_matrices
from phinv.psi1 import RationalApproxParams, r_nm_matrix
from phinv.testmatrices import TestMatrixSpec, build_matrix, toeplitz_eigenvalues, tridiag

E = math.e
P = RationalApproxParams


def laplacian(n, scale=1.0):
    return scale * tridiag(n, 1.0, -2.0, 1.0)


# ---------------------------------------------------------------- gmres


def test_gmres_identity():
    b = np.arange(1.0, 5.0)
    x, rep = gmres(lambda v: v, b)
    assert rep.iterations == 1 and rep.converged
    np.testing.assert_allclose(x, b, rtol=1e-15)


def test_gmres_diagonal_exact_after_n_steps():
    d = np.arange(1.0, 6.0)
    x, rep = gmres(lambda v: d * v, np.ones(5), GmresConfig(tol=1e-14))
    assert rep.iterations <= 5
    np.testing.assert_allclose(x, 1 / d, rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40))
def test_gmres_history_non_increasing(seed, n):
    rng = np.random.default_rng(seed)
    S = rng.standard_normal((n, n))
    A = S @ S.T + n * np.eye(n)
    _, rep = gmres(A.__matmul__, rng.standard_normal(n), GmresConfig(tol=1e-12, maxit=n + 5))
    h = rep.residual_history
    assert all(h[i + 1] <= h[i] * (1 + 1e-12) for i in range(len(h) - 1))


def test_gmres_complex_and_restart():
    rng = np.random.default_rng(1)
    A = np.eye(30) * 4 + rng.standard_normal((30, 30)) * 0.3 + 0.2j * np.eye(30)
    b = rng.standard_normal(30) + 0j
    x, rep = gmres(A.__matmul__, b, GmresConfig(tol=1e-12, maxit=200, restart=5))
    assert rep.restarts >= 1
    assert np.linalg.norm(A @ x - b) <= 1e-11 * np.linalg.norm(b)


def test_gmres_failures_carry_report():
    A = np.diag(np.arange(1.0, 21.0))
    with pytest.raises(MaxitReached) as info:
        gmres(A.__matmul__, np.ones(20), GmresConfig(maxit=3))
    assert info.value.report.iterations == 3 and info.value.result.shape == (20,)
    # a singular operator whose range misses b: the Krylov space closes early
    S = np.diag([1.0, 0.0])
    with pytest.raises(Stagnation):
        gmres(lambda v: S @ np.array([v[1], v[0]]), np.array([1.0, 0.0]))
    with pytest.raises(InputError):
        gmres(lambda v: v, np.zeros(3))
    with pytest.raises(InputError):
        GmresConfig(restart=0)


def test_gmres_prefix_is_reproducible():
    A = laplacian(40, -1.0) + 0.5 * np.eye(40)
    b = np.ones(40)
    _, full = gmres(A.__matmul__, b, GmresConfig(tol=1e-13, maxit=60))
    for m in (3, 7, 12):
        with pytest.raises(MaxitReached) as info:
            gmres(A.__matmul__, b, GmresConfig(tol=1e-13, maxit=m))
        assert info.value.report.residual_history[m] == full.residual_history[m]


# ---------------------------------------------------------------- psi2_apply


def test_psi2_apply_identity():
    b = np.array([1.0, -2.0, 0.5])
    x, _ = psi2_apply(np.eye(3), b, P(3, 64))
    np.testing.assert_allclose(x, b / (E - 2), rtol=1e-10)
    assert 1 / (E - 2) == pytest.approx(1.3922111911773331, rel=1e-15)


def test_psi2_apply_laplacian_dense_reference():
    A = laplacian(64)
    b = np.random.default_rng(2).standard_normal(64)
    x, rep = psi2_apply(A, b, P(2, 64))
    ref = psi_dense(A, 2) @ b
    assert np.linalg.norm(x - ref) <= 1e-10 * np.linalg.norm(ref)
    assert np.allclose(rep.rhs, r_nm_matrix(A, P(2, 64)) @ b)


def test_operator_matches_dense_product():
    A = laplacian(48, 2.0) + 0.4 * tridiag(48, 1.0, 0.0, -1.0)
    v = np.random.default_rng(3).standard_normal(48)
    op = psi2_operator(A, P(2, 64))
    ref = psi_dense(A, 1) @ (phi_matrices(A, 2)[2] @ v)
    assert np.linalg.norm(op(v) - ref) <= 1e-9 * np.linalg.norm(ref)


@pytest.mark.parametrize("seed", range(4))
def test_preconditioned_consistency(seed):
    rng = np.random.default_rng(seed)
    n = 40
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = Q @ np.diag(rng.uniform(-6.0, 1.0, n)) @ Q.T
    b = rng.standard_normal(n)
    cfg = GmresConfig(tol=1e-10)
    x, _ = psi2_apply(A, b, P(2, 32), cfg)
    P2 = phi_matrices(A, 2)[2]
    assert np.linalg.norm(P2 @ x - b) / np.linalg.norm(b) <= 10 * cfg.tol * np.linalg.cond(P2)


@pytest.mark.parametrize("n", [6, 10, 12])
def test_gmres_no_worse_than_newton(n):
    # the Newton iterate x_k = X_k b lies in the Krylov space of dimension 2^k
    A = laplacian(n, 2.0) + 0.5 * tridiag(n, 1.0, 0.0, -1.0)
    b = np.random.default_rng(n).standard_normal(n)
    params = P(3, 128)
    X0 = r_nm_matrix(A, params)
    B = phi_matrices(A, 2)[2]
    rhs = X0 @ b
    iterates = []
    try:
        newton_invert(B, X0, NewtonConfig(tol=1e-300, maxit=3),
                      callback=lambda k, X, r: iterates.append(X.copy()))
    except MaxitReached:
        pass
    _, rep = psi2_apply(A, b, params, GmresConfig(tol=1e-14, maxit=n))
    for k, X in enumerate(iterates):
        m = 2**k
        if m >= len(rep.residual_history):
            break
        newton_res = np.linalg.norm(rhs - X0 @ (B @ (X @ b)))
        assert rep.residual_history[m] <= newton_res * (1 + 1e-6) + 1e-9 * np.linalg.norm(rhs)


def test_itnew1_reduced_table_row():
    A, b, ref = tnew_problem(1)
    x, rep = psi2_apply(A, b, P(3, 16), GmresConfig(tol=1e-12))
    assert rep.matvecs == 17
    assert rep.final_relative_residual <= 1e-12
    assert np.linalg.norm(x - ref) / np.linalg.norm(ref) <= 1e-12


def test_itnew2_reduced_table_row():
    A, b, ref = tnew_problem(2)
    x, rep = psi2_apply(A, b, P(3, 32), GmresConfig(tol=1e-12), compensated=True)
    assert rep.matvecs == 3
    err = np.linalg.norm(x - ref) / np.linalg.norm(ref)
    assert 4.4e-6 <= err <= 4.4e-4


# ---------------------------------------------------------------- bound


def test_bound_laplacian_and_scalar():
    A = laplacian(64)
    _, rep = psi2_apply(A, np.ones(64), P(2, 32))
    assert gmres_bound_check(A, 1, rep)
    A = 0.5 * np.eye(5)
    _, rep = psi2_apply(A, np.ones(5), P(2, 32))
    assert rep.iterations == 1 and gmres_bound_check(A, 1, rep)


def test_bound_toeplitz_geometric_rate():
    N = 128
    A = build_matrix(TestMatrixSpec("toeplitz_tridiag", N, h=float(N) ** 2))
    rho = spectral_map_rho(toeplitz_eigenvalues(N, float(N) ** 2), 1)
    assert round(rho, 4) == 0.5071
    _, rep = psi2_apply(A, np.ones(N), P(2, 32))
    assert gmres_bound_check(A, 1, rep, rho=rho)


def test_bound_rejects_non_normal():
    A = np.triu(np.ones((4, 4))) - 2 * np.eye(4)
    _, rep = psi2_apply(A, np.ones(4))
    with pytest.raises(NotNormal):
        gmres_bound_check(A, 1, rep)


# ---------------------------------------------------------------- baseline


def test_baseline_scalar_exact():
    w, trace = arnoldi_psi2_baseline(np.eye(1), np.ones(1), 1)
    assert w[0] == pytest.approx(1 / (E - 2), rel=1e-14)
    assert trace.err1 == [] and trace.steps == 1


def test_baseline_laplacian_converges():
    A = laplacian(64)
    b = np.random.default_rng(5).standard_normal(64)
    ref = psi_dense(A, 2) @ b
    w, trace = arnoldi_psi2_baseline(A, b, 64, stop_tol=1e-14, reference=ref)
    assert trace.err2[-1] <= 1e-10
    assert len(trace.err1) == trace.steps - 1


def test_baseline_itnew2_degrades():
    A, b, ref = tnew_problem(2)
    _, trace = arnoldi_psi2_baseline(A, b, 40, reference=ref, breakdown_tol=0.0,
                                     on_singular="record")
    err2 = np.array(trace.err2)
    assert 1e-10 <= err2.min() <= 1e-6
    assert err2[-1] > 1e-1
    assert int(err2.argmin()) < len(err2) - 1


def test_baseline_singular_raises_by_default():
    A, b, _ = tnew_problem(2)
    with pytest.raises(SingularHessenbergPhi):
        arnoldi_psi2_baseline(A, b, 40, breakdown_tol=0.0)
