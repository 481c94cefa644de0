import math

import numpy as np
import pytest
from hypothesis import given, settings

from _props import (check_ordering, check_recurrence, check_strip_contraction,
                    ordering_strategy, recurrence_strategy, strip_strategy)
from phinv.exceptions import InputError
from phinv.phi import (PhiEvalConfig, PhiOrder, expm_action, phi_action, phi_integral_oracle,
                       phi_matrices, phi_matrix, phi_recurrence_lift, phi_scalar)
from phinv.testmatrices import tridiag

E = math.e


def test_phi_order():
    assert PhiOrder(0).inv_factorial == 1.0
    for ell in range(21):
        assert PhiOrder(ell).inv_factorial == 1 / math.factorial(ell)
    with pytest.raises(InputError):
        PhiOrder(-1)
    with pytest.raises(InputError):
        phi_scalar(4, 1.0)


def test_config_validation():
    PhiEvalConfig()
    with pytest.raises(InputError):
        PhiEvalConfig(taylor_tol=1e-20)
    with pytest.raises(InputError):
        PhiEvalConfig(max_terms=4)


# ---------------------------------------------------------------- scalar


def test_phi_at_zero():
    assert phi_scalar(0, 0.0) == 1.0
    assert phi_scalar(1, 0.0) == 1.0
    assert phi_scalar(2, 0.0) == 0.5
    assert phi_scalar(3, 0.0) == pytest.approx(1 / 6, rel=1e-16)


def test_phi_closed_forms_at_one():
    assert abs(phi_scalar(1, 1.0) - 1.7182818284590452) <= 4e-16
    assert abs(phi_scalar(2, 1.0) - 0.7182818284590452) <= 4e-16


def test_phi_closed_forms_vectorized():
    z = np.array([-30.0, -2.5, -0.7, 0.3, 1.0, 4.0, 3 + 2j, -1 - 1j, 1e-9])
    z = z.astype(complex)
    np.testing.assert_allclose(phi_scalar(1, z), np.expm1(z) / z, rtol=1e-14)
    np.testing.assert_allclose(phi_scalar(2, z[:-1]), (np.exp(z[:-1]) - 1 - z[:-1]) / z[:-1] ** 2,
                               rtol=1e-12)


def test_phi2_vs_quadrature_oracle():
    z = 2 + 3j
    assert abs(phi_scalar(2, z) / phi_integral_oracle(2, z) - 1) <= 1e-12


def test_oracle_examples():
    assert phi_integral_oracle(1, 0.0) == pytest.approx(1.0, rel=1e-15)
    assert phi_integral_oracle(2, 1.0) == pytest.approx(E - 2, rel=1e-14)
    assert phi_integral_oracle(3, -5.0) == pytest.approx(phi_scalar(3, -5.0), rel=1e-12)


def test_small_large_branch_continuity():
    # the Taylor and recurrence branches meet at |z| = 1
    for ell in (1, 2, 3):
        for ang in np.linspace(0, 2 * np.pi, 13):
            lo = np.exp(1j * ang) * (1 - 1e-12)
            hi = np.exp(1j * ang) * (1 + 1e-12)
            for z in (lo, hi):
                ref = phi_integral_oracle(ell, z)
                assert abs(phi_scalar(ell, z) - ref) <= 1e-14 * abs(ref)


# ---------------------------------------------------------------- matrix


def test_phi_matrix_zero_and_diagonal():
    for ell in range(4):
        np.testing.assert_allclose(phi_matrix(ell, np.zeros((4, 4))),
                                   np.eye(4) / math.factorial(ell), rtol=1e-15)
    z = np.array([-3.0, -0.5, 0.0, 0.25, 2.0, 1 + 1j])
    for ell in range(4):
        np.testing.assert_allclose(np.diag(phi_matrix(ell, np.diag(z))), phi_scalar(ell, z),
                                   rtol=1e-12)


def test_recurrence_on_scaled_laplacian():
    N = 32
    A = (N + 1) ** 2 * tridiag(N, 1.0, -2.0, 1.0)
    P1, P2 = phi_matrix(1, A), phi_matrix(2, A)
    assert np.linalg.norm(P1 - (A @ P2 + np.eye(N))) / np.linalg.norm(P1) <= 1e-10


def test_phi_matrix_methods_agree():
    A = np.random.default_rng(0).standard_normal((12, 12))
    A *= 0.9 / np.linalg.norm(A, 1)
    for ell in range(4):
        np.testing.assert_allclose(phi_matrix(ell, A, method="taylor"), phi_matrix(ell, A),
                                   rtol=1e-13, atol=1e-15)
    with pytest.raises(InputError):
        phi_matrix(1, 3 * A, method="taylor")


def test_phi_0_matches_scipy_expm():
    from scipy.linalg import expm

    A = np.random.default_rng(1).standard_normal((20, 20)) * 2
    np.testing.assert_allclose(phi_matrix(0, A), expm(A), rtol=1e-12)


def test_one_by_one_matches_scalar():
    for z in (-7.0, 0.3, 2.0 + 5j):
        for ell in range(4):
            assert abs(phi_matrix(ell, np.array([[z]]))[0, 0] - phi_scalar(ell, z)) <= \
                1e-13 * abs(phi_scalar(ell, z))


def test_recurrence_lift():
    np.testing.assert_array_equal(phi_recurrence_lift(1, np.full((3, 3), 7.0), np.zeros((3, 3))),
                                  np.eye(3))
    got = phi_recurrence_lift(1, np.array([[E - 2]]), np.array([[1.0]]))
    assert got[0, 0] == pytest.approx(E - 1, rel=1e-15)
    A = np.random.default_rng(2).standard_normal((16, 16))
    for ell in range(3):
        P = phi_matrices(A, ell + 1)
        lifted = phi_recurrence_lift(ell, P[ell + 1], A)
        assert np.linalg.norm(lifted - P[ell]) <= 1e-11 * np.linalg.norm(P[ell])


# ---------------------------------------------------------------- action


def test_action_matches_matrix():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((30, 30)) * 0.5
    v = rng.standard_normal(30)
    for ell in range(4):
        np.testing.assert_allclose(phi_action(ell, A, v), phi_matrix(ell, A) @ v,
                                   rtol=1e-12, atol=1e-13)
    V = rng.standard_normal((30, 3))
    np.testing.assert_allclose(phi_action(2, A, V), phi_matrix(2, A) @ V, rtol=1e-12)


def test_compensated_action_matches():
    A = tridiag(20, 1.0, -2.0, 1.0)
    v = np.ones(20)
    np.testing.assert_allclose(phi_action(2, A, v, compensated=True), phi_matrix(2, A) @ v,
                               rtol=1e-13)


def test_expm_action_is_deterministic():
    A = np.random.default_rng(4).standard_normal((25, 25))
    v = np.ones(25)
    assert np.array_equal(expm_action(A, v), expm_action(A, v))


# ---------------------------------------------------------------- properties


@settings(max_examples=60, deadline=None)
@given(**recurrence_strategy)
def test_recurrence_property(n, seed, norm1, ell, complex_):
    check_recurrence(n, seed, norm1, ell, complex_)


@settings(max_examples=300, deadline=None)
@given(**ordering_strategy)
def test_ordering_property(x, ell):
    check_ordering(x, ell)


@settings(max_examples=300, deadline=None)
@given(**strip_strategy)
def test_strip_contraction_property(a, b, ell):
    check_strip_contraction(a, b, ell)
