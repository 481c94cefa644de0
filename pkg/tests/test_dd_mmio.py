from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phinv import dd
from phinv.exceptions import InputError
from phinv.mmio import read_matrix, read_vector, write_matrix, write_vector

# error-free transformations are exact only while products stay normalized
finite = st.one_of(st.just(0.0), st.floats(1e-100, 1e100), st.floats(-1e100, -1e-100))


def _f(x):
    return float(np.ravel(x)[0])


@settings(max_examples=200, deadline=None)
@given(a=finite, b=finite)
def test_two_sum_and_two_prod_are_exact(a, b):
    s, e = map(_f, dd.two_sum(np.float64(a), np.float64(b)))
    assert Fraction(s) + Fraction(e) == Fraction(a) + Fraction(b)
    p, e = map(_f, dd.two_prod(np.float64(a), np.float64(b)))
    assert Fraction(p) + Fraction(e) == Fraction(a) * Fraction(b)


def test_from_fraction_roundtrip():
    q = Fraction(1, 3)
    hi, lo = dd.from_fraction(q)
    assert abs(Fraction(hi) + Fraction(lo) - q) < Fraction(1, 2**105)


def test_ddmatrix_matvec_beats_double():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((40, 40))
    x = rng.standard_normal(40)
    exact = [sum(Fraction(a) * Fraction(b) for a, b in zip(row, x)) for row in A]
    hi, lo = dd.DDMatrix(A).matvec(x)
    err_dd = max(abs(Fraction(h) + Fraction(l) - e) for h, l, e in zip(hi, lo, exact))
    scale = float(np.abs(A).sum(axis=1).max() * np.abs(x).max())
    assert float(err_dd) <= 1e-28 * scale


def test_ddmatrix_complex_block():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    X = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
    hi, lo = dd.DDMatrix(A).matvec(X)
    np.testing.assert_allclose(hi + lo, A @ X, rtol=1e-14)


def test_matrix_market_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    for A in (rng.standard_normal((5, 3)), rng.standard_normal((4, 4)) + 1j * rng.random((4, 4))):
        p = tmp_path / "a.mtx"
        write_matrix(p, A, comment="test")
        B = read_matrix(p)
        assert B.dtype == A.dtype
        assert np.array_equal(A, B)


def test_coordinate_format_is_densified(tmp_path):
    p = tmp_path / "c.mtx"
    p.write_text("%%MatrixMarket matrix coordinate real general\n3 3 2\n1 1 2.5\n3 2 -1\n")
    A = read_matrix(p)
    expected = np.zeros((3, 3))
    expected[0, 0], expected[2, 1] = 2.5, -1
    np.testing.assert_array_equal(A, expected)


def test_vector_roundtrip(tmp_path):
    p = tmp_path / "v.txt"
    for v in (np.array([1 / 3, -2.0, 1e-300]), np.array([1 + 2j, -0.1j])):
        write_vector(p, v)
        w = read_vector(p)
        assert np.array_equal(v, w)
    assert len(p.read_text().splitlines()[0].split()) == 2  # "re im"


def test_bad_files(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("1 2 3\n")
    with pytest.raises(InputError):
        read_vector(p)
    p.write_text("")
    with pytest.raises(InputError):
        read_vector(p)
    with pytest.raises(InputError):
        read_matrix(p)
