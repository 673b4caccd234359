import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ggmink.cli import SCHEMA, main, parse_params
from ggmink.errors import DomainError


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write_problem(tmp_path, directions, weights, even=False, c=0.6, params=(2, 2.0, 0.0, 1.0)):
    prob = {"params": list(params), "c": c,
            "measure": {"atoms": [{"dir": list(d), "w": w} for d, w in zip(directions, weights)], "even": even}}
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(prob))
    return str(path)


def test_parse_params():
    p = parse_params("2,2,0")
    assert (p.n, p.alpha, p.q, p.p) == (2, 2.0, 0.0, 1.0)
    assert parse_params("3,1,-0.5,2").p == 2.0
    for bad in ("2,2", "a,b,c", "2.5,1,0"):
        with pytest.raises(DomainError):
            parse_params(bad)


def test_volume_of_gaussian_unit_disc(capsys):
    code, out, _ = run(["volume", "--params", "2,2,0", "--ball", "1"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["schema"] == SCHEMA
    assert rep["G"] == pytest.approx(1 - math.exp(-0.5), abs=1e-4)
    assert rep["body"]["exact_ball_mass"] == pytest.approx(1 - math.exp(-0.5), rel=1e-14)
    assert rep["error_estimate"] < 1e-3
    assert rep["params"]["alpha"] == 2.0


def test_volume_of_huge_box(capsys):
    code, out, _ = run(["volume", "--params", "2,2,0", "--box", "40,40"], capsys)
    assert code == 0 and json.loads(out)["G"] == pytest.approx(1.0, abs=1e-12)


def test_volume_reads_polytope_file(tmp_path, capsys):
    from ggmink.geometry import Polytope

    path = tmp_path / "body.json"
    path.write_text(json.dumps(Polytope.box([1.0, 1.0]).to_dict()))
    code, out, _ = run(["volume", "--params", "2,2,0", "--body", str(path)], capsys)
    exact = math.erf(1 / math.sqrt(2)) ** 2
    assert code == 0 and json.loads(out)["G"] == pytest.approx(exact, rel=1e-10)


def test_surface_measure_csv(tmp_path, capsys):
    out_path = tmp_path / "atoms.csv"
    code, out, _ = run(["surface-measure", "--params", "2,2,0,1", "--box", "1,1", "--out", str(out_path)], capsys)
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert len(lines) == 5
    weights = [float(r.split(",")[-1]) for r in lines[1:]]
    assert np.allclose(weights, weights[0], rtol=1e-12)
    assert json.loads(out)["atoms"] == 4


def test_solve_normalized_uniform_measure(tmp_path, capsys):
    m = 12
    dirs = [(math.cos(2 * math.pi * j / m), math.sin(2 * math.pi * j / m)) for j in range(m)]
    path = write_problem(tmp_path, dirs, [1.0] * m)
    code, out, _ = run(["solve-normalized", "--problem", path], capsys)
    rep = json.loads(out)
    assert code == 0
    sol = rep["solution"]
    assert sol["volume"] == pytest.approx(0.6, abs=1e-7)
    h = np.array(sol["support_numbers"])
    assert np.allclose(h, h[0], rtol=1e-6)


def test_solve_normalized_refuses_hemisphere(tmp_path, capsys):
    dirs = [(1.0, 0.0), (0.6, 0.8), (0.6, -0.8)]
    path = write_problem(tmp_path, dirs, [1.0, 1.0, 1.0])
    code, _, err = run(["solve-normalized", "--problem", path], capsys)
    assert code == 3
    assert "ggmink" in err


def test_solve_normalized_refuses_inadmissible_even_pair(tmp_path, capsys):
    dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
    path = write_problem(tmp_path, dirs, [1.0] * 4, even=True, params=(2, 2.0, -0.5, -7.0))
    code, _, err = run(["solve-normalized", "--problem", path], capsys)
    assert code == 3
    assert "inadmissible" in err


def test_solve_ma2d_continuity(tmp_path, capsys):
    out_path = tmp_path / "h.csv"
    code, out, _ = run(["solve-ma2d", "--params", "2,2,0,3", "--f-cos", "0.1,0.2,3", "--grid", "64",
                        "--out", str(out_path)], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["mode"] == "continuity"
    assert rep["solution"]["residual_sup"] <= 1e-10
    assert out_path.read_text().splitlines()[0] == "theta,h,dh,residual"


def test_solve_ma2d_two_branch(tmp_path, capsys):
    out_path = tmp_path / "h.csv"
    code, out, _ = run(["solve-ma2d", "--params", "2,2,0,1", "--f-cos", "0.005,0.05,3", "--grid", "64",
                        "--out", str(out_path)], capsys)
    assert code == 0
    rep = json.loads(out)["solution"]
    assert rep["low"]["volume"] < 0.5 < rep["high"]["volume"]
    assert out_path.read_text().splitlines()[0].startswith("theta,h_low")


def test_solve_ma2d_no_constant_root_exits_3(capsys):
    code, _, _ = run(["solve-ma2d", "--params", "2,2,0,1", "--f-cos", "1.0,0.0,0", "--grid", "32"], capsys)
    assert code == 3


def test_solve_ma2d_forcing_file(tmp_path, capsys):
    cfg = tmp_path / "f.json"
    cfg.write_text(json.dumps({"type": "constant", "c": 0.1}))
    code, out, _ = run(["solve-ma2d", "--params", "2,2,0,3", "--forcing", str(cfg), "--grid", "32"], capsys)
    assert code == 0
    assert len(out.splitlines()) == 33


def test_isotropic_sweep(tmp_path, capsys):
    curve = tmp_path / "phi.csv"
    code, out, _ = run(["isotropic", "--params", "2,2,0,1", "--curve", str(curve)], capsys)
    rep = json.loads(out)
    assert code == 0
    assert [row["kind"] for row in rep["trichotomy"]] == ["TwoRoots", "OneRoot", "NoRoot"]
    assert rep["critical"]["c_star"] == pytest.approx(math.exp(-0.5) / (2 * math.pi), rel=1e-12)
    assert curve.read_text().startswith("r,")


def test_check_suite_passes(capsys):
    code, out, _ = run(["check", "gtilde", "--n", "2", "--trials", "3", "--grid", "64"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["report"]["ok"] and rep["report"]["trials"] == 3


def test_check_from_config(tmp_path, capsys):
    cfg = tmp_path / "suite.json"
    cfg.write_text(json.dumps({"suite": "divergence", "n": 2, "trials": 2, "grid": 64}))
    code, out, _ = run(["check", "--config", str(cfg)], capsys)
    assert code == 0 and json.loads(out)["report"]["trials"] == 2


def test_check_threshold(capsys):
    code, out, _ = run(["check", "threshold", "--params", "2,2,0,1", "--trials", "5", "--grid", "128"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["threshold"] == pytest.approx(rep["estimate"]["estimate"])


@pytest.mark.parametrize("argv", [
    ["volume", "--params", "2,2"],
    ["volume", "--params", "2,2,0"],
    ["volume", "--params", "2,2,0", "--ball", "1", "--tol", "-1"],
    ["volume", "--params", "2,2,0", "--body", "/nonexistent.json"],
    ["volume", "--params", "2,2,5", "--ball", "1"],
    ["frobnicate"],
    ["check"],
])
def test_input_errors_exit_2(argv, capsys):
    code, _, _ = run(argv, capsys)
    assert code == 2


def test_outputs_are_byte_identical(capsys):
    argv = ["check", "brunn-minkowski", "--n", "2", "--trials", "2", "--grid", "32", "--seed", "5"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "ggmink", "isotropic", "--params", "2,2,0,1", "--c", "0.05"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["trichotomy"][0]["kind"] == "TwoRoots"
