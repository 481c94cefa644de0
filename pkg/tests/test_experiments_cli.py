import cmath
import json

import numpy as np
import pytest

from phinv.cli import main
from phinv.exceptions import InvalidSpec
from phinv.experiments import (ExperimentResult, baseline_comparison, error_surface,
                               table1_experiment, tnew_experiment)
from phinv.mmio import read_matrix, read_vector, write_matrix, write_vector
from phinv.newton import psi_dense
from phinv.psi1 import RationalApproxParams
from phinv.testmatrices import TestMatrixSpec, build_matrix, itnew2_roots, tridiag

P = RationalApproxParams


# ---------------------------------------------------------------- matrices


def test_toeplitz_entries():
    A = build_matrix(TestMatrixSpec("toeplitz_tridiag", 4, h=16.0))
    expect = np.array([[0.0, -0.5, 0.0, 0.0],
                       [0.5, 0.0, -0.5, 0.0],
                       [0.0, 0.5, 0.0, -0.5],
                       [0.0, 0.0, 0.5, 0.0]])
    np.testing.assert_array_equal(A, expect)


def test_itnew1_cyclic_shift():
    Z = build_matrix(TestMatrixSpec("itnew1", 3))
    np.testing.assert_array_equal(Z, [[0, 0, 1], [1, 0, 0], [0, 1, 0]])
    A = build_matrix(TestMatrixSpec("itnew1", 3, epsilon=0.25))
    np.testing.assert_array_equal(A - Z, np.full((3, 3), 0.25))


def test_itnew2_roots_and_layout():
    z, zc = itnew2_roots()
    assert abs(z - (2.0888 + 7.4615j)) <= 1e-4 and zc == z.conjugate()
    for r in (z, zc):
        assert abs(cmath.exp(r) - 1 - r) <= 1e-13
    A = build_matrix(TestMatrixSpec("itnew2", 6))
    np.testing.assert_array_equal(np.diag(A), [z, zc] * 3)


def test_build_is_deterministic():
    for spec in (TestMatrixSpec("itnew2", 16, epsilon=1e-8), TestMatrixSpec("q1_2d", 64, block=8),
                 TestMatrixSpec("heat", 32), TestMatrixSpec("laplacian1d", 10, h=0.5)):
        assert np.array_equal(build_matrix(spec), build_matrix(spec))


def test_invalid_specs():
    for bad in (dict(kind="nope", N=4), dict(kind="q1_2d", N=10, block=3),
                dict(kind="toeplitz_tridiag", N=4, h=0.0), dict(kind="itnew1", N=0),
                dict(kind="heat", N=4)):
        with pytest.raises(InvalidSpec):
            TestMatrixSpec(**bad)


# ---------------------------------------------------------------- table1


def test_table1_values():
    res = table1_experiment(128, dense_check=False)
    rho = res.column("rho_mapping")
    expect = [1.6852e3, 57.5590, 0.5071, 0.5000]
    for got, want in zip(rho, expect):
        assert f"{got:.3e}" == f"{want:.3e}"  # four significant digits
    assert res.column("h_label") == ["1", "N", "N^2", "N^4"]


@pytest.mark.slow
def test_table1_dense_agrees_in_contractive_cases():
    res = table1_experiment(128)
    for row in res.rows[2:]:
        d = dict(zip(res.columns, row))
        assert float(f"{d['rho_dense']:.3g}") == float(f"{d['rho_mapping']:.3g}")


def test_result_csv_round_trip(tmp_path):
    res = table1_experiment(16, dense_check=True)
    back = ExperimentResult.from_csv(res.to_csv())
    assert back.name == res.name and back.columns == res.columns
    assert back.params == res.params and back.summary == res.summary
    for a, b in zip(res.rows, back.rows):
        assert a == b
    res.write(tmp_path / "t.csv")
    assert ExperimentResult.from_csv((tmp_path / "t.csv").read_text()).rows == res.rows


# ---------------------------------------------------------------- surface


def test_surface_zero_and_ordering():
    small = error_surface(P(2, 32), grid=17)
    d = {(re, im): e for re, im, e in small.rows}
    assert d[(0.0, 0.0)] <= 1e-15
    finer = error_surface(P(2, 64), grid=17)
    assert finer.summary["max_error"] < small.summary["max_error"]
    wide = error_surface(P(2, 64), re_range=(-9.0, 9.0), grid=17)
    assert wide.summary["max_error"] > finer.summary["max_error"]
    with pytest.raises(ValueError):
        error_surface(P(2, 32), grid=8)


def test_surface_masks_poles():
    res = error_surface(P(2, 8), re_range=(-1.0, 1.0), im_range=(0.0, 4 * np.pi), grid=17)
    assert res.summary["masked"] >= 1
    assert any(np.isnan(e) for _, _, e in res.rows)
    assert ExperimentResult.from_csv(res.to_csv()).summary == res.summary


# ---------------------------------------------------------------- tnew


def test_tnew_small_rows():
    res = tnew_experiment(1, [(3, 8)], N=32)
    assert res.column("it_gmres") == [17]
    assert res.column("err2")[0] <= 1e-11
    par = tnew_experiment(2, [(3, 16), (3, 32)], N=32, parallel=True)
    seq = tnew_experiment(2, [(3, 16), (3, 32)], N=32)
    assert par.column("err2") == seq.column("err2")


# ---------------------------------------------------------------- baseline


def test_baseline_first_step_has_no_err1():
    from phinv.krylov import arnoldi_psi2_baseline

    _, trace = arnoldi_psi2_baseline(np.eye(1), np.ones(1), 1)
    assert trace.err1 == []


def test_baseline_itnew2_shape():
    res = baseline_comparison(2)
    err2 = np.array(res.column("err2"))
    assert 1e-10 <= err2.min() <= 1e-6 and err2[-1] > 0.1
    assert np.isnan(res.column("err1")[0])


@pytest.mark.xfail(strict=True, reason="the projection method stays accurate on itnew1 here; "
                   "the reported loss of precision is not observed")
def test_baseline_itnew1_degrades():
    res = baseline_comparison(1)
    assert res.summary["final_err2"] > 1e-11


# ---------------------------------------------------------------- CLI


@pytest.fixture()
def files(tmp_path):
    A = 2 * tridiag(12, 1.0, -2.0, 1.0)
    b = np.linspace(-1.0, 1.0, 12)
    write_matrix(tmp_path / "A.mtx", A)
    write_vector(tmp_path / "b.txt", b)
    return tmp_path, A, b


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out.strip().splitlines()
    return code, [json.loads(line) for line in out]


def test_cli_phi_and_psi(files, capsys):
    d, A, b = files
    code, out = run(capsys, "phi-eval", "--matrix", d / "A.mtx", "--vector", d / "b.txt",
                    "--ell", 2, "--out-dir", d)
    assert code == 0
    from phinv.phi import phi_matrix

    np.testing.assert_allclose(read_vector(out[0]["out"]), phi_matrix(2, A) @ b, rtol=1e-12)
    code, out = run(capsys, "psi1-apply", "--matrix", d / "A.mtx", "--vector", d / "b.txt",
                    "--out-dir", d, "--threads", 1)
    assert code == 0 and out[0]["max_shift_residual"] <= 1e-12
    assert len((d / "psi1_v_shifts.jsonl").read_text().splitlines()) == 32
    code, out = run(capsys, "psi2-apply", "--matrix", d / "A.mtx", "--vector", d / "b.txt",
                    "--m", 64, "--out-dir", d)
    assert code == 0
    x = read_vector(out[0]["out"])
    assert np.linalg.norm(x - psi_dense(A, 2) @ b) <= 1e-10 * np.linalg.norm(x)
    assert json.loads((d / "psi2_v_report.json").read_text())["converged"]


def test_cli_newton(files, capsys):
    d, A, _ = files
    for ell in (1, 2, 3):
        code, out = run(capsys, "newton-invert", "--matrix", d / "A.mtx", "--ell", ell,
                        "--out-dir", d)
        assert code == 0
        X = read_matrix(out[0]["out"])
        assert np.linalg.norm(X - psi_dense(A, ell)) <= 1e-9 * np.linalg.norm(X)


def test_cli_experiments(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PHINV_THREADS", "1")
    code, out = run(capsys, "table1", "--N", 16, "--out-dir", tmp_path)
    assert code == 0 and (tmp_path / "table1.csv").exists()
    code, out = run(capsys, "tnew", "--which", 1, "--N", 32, "--params", "3:8", "--out-dir",
                    tmp_path)
    assert code == 0 and out[-1]["it_gmres"] == 17
    code, out = run(capsys, "surface", "--grid", 16, "--out-dir", tmp_path)
    assert code == 0 and (tmp_path / "surface_n2_m32.csv").exists()
    code, out = run(capsys, "baseline", "--which", 2, "--N", 32, "--jmax", 8, "--out-dir",
                    tmp_path)
    assert code == 0
    res = ExperimentResult.from_csv(open(out[0]["csv"]).read())
    assert len(res.rows) == 8


def test_cli_inverse(files, capsys):
    d, A, b = files
    code, out = run(capsys, "inverse", "heat", "--heat-N", 32, "--out-dir", d)
    assert code == 0 and out[0]["max_error"] <= 1e-6
    lines = (d / "inverse_heat_error.csv").read_text().splitlines()
    assert lines[0] == "grid_point,recovered,true,abs_error" and len(lines) == 33
    from phinv.inverse import two_point_forward

    q = np.ones(12)
    write_vector(d / "q.txt", q)
    write_vector(d / "g.txt", two_point_forward(A, q, b))
    code, out = run(capsys, "inverse", "two-point", "--matrix", d / "A.mtx", "--q", d / "q.txt",
                    "--g", d / "g.txt", "--truth", d / "b.txt", "--out-dir", d)
    assert code == 0 and out[0]["max_error"] <= 1e-8
    code, out = run(capsys, "inverse", "nonlocal", "--heat-N", 16, "--T", 0.5, "--out-dir", d)
    assert code == 0 and out[0]["max_error"] <= 1e-6


def test_cli_exit_codes(files, capsys):
    d, A, b = files
    code, _ = run(capsys, "psi2-apply", "--matrix", d / "A.mtx", "--vector", d / "b.txt",
                  "--maxit", 1, "--out-dir", d)
    assert code == 2
    assert (d / "psi2_v.txt").exists()
    code, _ = run(capsys, "phi-eval", "--matrix", d / "missing.mtx")
    assert code == 3
    code, _ = run(capsys, "inverse", "two-point", "--matrix", d / "A.mtx")
    assert code == 3
    write_vector(d / "short.txt", np.ones(3))
    code, _ = run(capsys, "psi1-apply", "--matrix", d / "A.mtx", "--vector", d / "short.txt")
    assert code == 3
    code, _ = run(capsys, "newton-invert", "--matrix", d / "A.mtx", "--ell", 2, "--maxit", 1,
                  "--out-dir", d)
    assert code == 2
