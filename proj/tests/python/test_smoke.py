import os
import pathlib

import numpy as np
import pytest

import covsteer

CONFIGS = pathlib.Path(os.environ.get("COVSTEER_CONFIG_DIR", pathlib.Path(__file__).resolve().parents[2] / "configs"))


def scalar_system():
    s = covsteer.SystemSpec()
    s.n = s.p = s.q = 1
    s.A = covsteer.MatrixPoly(1, 1, [[0.0]])
    s.B = covsteer.MatrixPoly(1, 1, [[1.0]])
    s.C = covsteer.MatrixPoly(1, 1, [[1.0]])
    s.D = covsteer.MatrixPoly(1, 1, [[1.0]])
    s.nu = covsteer.MatrixPoly(1, 1, [[0.0]])
    s.Q = covsteer.MatrixPoly(1, 1, [[0.0]])
    s.R = covsteer.MatrixPoly(1, 1, [[1.0]])
    return s


def test_polynomial_evaluation():
    p = covsteer.MatrixPoly(1, 2, [[1.0, 2.0], [0.0, 0.0, 3.0]])
    np.testing.assert_allclose(p(0.5), [[2.0, 0.75]])


def test_scalar_solve():
    sol = covsteer.solve_boundary(scalar_system(), covsteer.BoundaryData(np.eye(1), 0.5 * np.eye(1)))
    assert sol.Pi0[0, 0] == pytest.approx(0.6339746, abs=1e-7)
    assert sol.residual < 1e-8
    assert sol.sigma[-1][0, 0] == pytest.approx(0.5, abs=1e-8)


def test_boundary_map_and_jacobian():
    s = scalar_system()
    assert covsteer.map_f(s, np.eye(1), np.zeros((1, 1)))[0, 0] == pytest.approx(2.0, abs=1e-9)
    assert covsteer.jacobian_f(s, np.eye(1), np.zeros((1, 1)))[0, 0] == pytest.approx(-3.0, abs=1e-9)


def test_classification():
    r = covsteer.classify(covsteer.load_config(str(CONFIGS / "example_sec6.json")).system)
    assert r["totally_controllable"] and r["uniformly_controllable"] and r["index_invariant"]


def test_config_round_trip():
    cfg = covsteer.load_config(str(CONFIGS / "example_sec6.json"))
    again = covsteer.parse_config(covsteer.emit_config(cfg))
    assert covsteer.same_config(cfg, again)
    d, nu = covsteer.derive_intensities(cfg.noise)
    np.testing.assert_allclose(d(0.0), [[0.75]])
    np.testing.assert_allclose(nu(0.0), [[0.5]])


def test_config_errors_raise():
    with pytest.raises(covsteer.CovsteerError):
        covsteer.parse_config('{"system": {"A": [[0]], "bogus": 1}}')


def test_cli_solve(tmp_path):
    code, out, err = covsteer.run_command("solve", str(CONFIGS / "example_sec6.json"), out=str(tmp_path))
    assert code == 0, err
    for name in ("gain.csv", "covariance.csv", "pi.csv", "cost.json"):
        assert (tmp_path / name).exists()


def test_cli_not_controllable(tmp_path):
    code, _, err = covsteer.run_command("solve", str(CONFIGS / "zero_input.json"), out=str(tmp_path))
    assert code == 2
    assert "not totally controllable" in err


def test_small_simulation():
    cfg = covsteer.load_config(str(CONFIGS / "scalar.json"))
    sol = covsteer.solve_boundary(cfg.system, cfg.boundary, grid_size=201)
    r = covsteer.simulate(cfg.system, cfg.noise, sol, np.eye(1), num_paths=4000, step_size=5e-3, seed=7)
    assert r["cov"][0, 0] == pytest.approx(0.5, rel=0.1)
    assert abs(r["mean"][0]) < 4 * np.sqrt(0.5 / 4000)
    again = covsteer.simulate(cfg.system, cfg.noise, sol, np.eye(1), num_paths=4000, step_size=5e-3, seed=7, threads=1)
    np.testing.assert_array_equal(r["cov"], again["cov"])
