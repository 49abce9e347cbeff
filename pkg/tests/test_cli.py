import json

import numpy as np
import pytest

from tvcomplete import cli
from tvcomplete import io as tio
from tvcomplete.grid import ParameterError, sample_uniform_subset, tv_aniso
from tvcomplete.phantom import shepp_logan
from tvcomplete.solver import TVProblem, check_max_principle


@pytest.fixture
def problem_file(tmp_path):
    f = shepp_logan(16)
    s = sample_uniform_subset(f.size, 128, 0)
    path = tmp_path / "problem.json"
    tio.write_json(path, tio.problem_to_json(TVProblem.from_field(f, s)))
    return path


def run(argv, env=None):
    return cli.main(argv, environ=env or {})


def test_solve_roundtrip(problem_file, tmp_path, capsys):
    out = tmp_path / "res" / "u.json"
    assert run(["solve", "--input", str(problem_file), "--out", str(out), "--csv", str(tmp_path / "u.csv")]) == 0
    obj = tio.read_json(out)
    u = tio.field_from_json(obj)
    assert check_max_principle(u, 1.0, 1e-6)
    assert tv_aniso(u) == pytest.approx(obj["result"]["tv_value"], abs=1e-12)
    manifest = tio.read_json(out.parent / "manifest.json")
    assert manifest["command"] == "solve" and manifest["config"]["method"] == "primal-dual"
    assert np.loadtxt(tmp_path / "u.csv", delimiter=",").shape == (16, 16)


def test_solve_nonconvergence_exit_code(problem_file, tmp_path, capsys):
    rc = run(["solve", "--input", str(problem_file), "--out", str(tmp_path / "u.json"), "--max-iters", "2"])
    assert rc == 2
    diag = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert diag["error"] == "NumericalFailure"


def test_usage_errors(capsys):
    assert run(["solve", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert run([]) == 1
    assert run(["solve"]) == 1
    assert run(["bounds", "--N", "abc"]) == 1


def test_help_exit_zero(capsys):
    assert run(["--help"]) == 0
    assert "sweep-density" in capsys.readouterr().out


def test_bounds_command(capsys):
    rc = run(["bounds", "--M", "1", "--Cf", "1", "--d", "2", "--a", "1", "--b", "0.5",
              "--N", "512", "--rho", "0.5", "--eta", "0"])
    assert rc == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["c_tilde"] == pytest.approx(2176 / 3)


def test_config_layering(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"N": 32, "rho": 0.25}))
    assert run(["bounds", "--config", str(cfg)], env={"TVC_N": "64"}) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["params"]["N"] == 64 and rep["params"]["rho"] == 0.25
    assert run(["bounds", "--config", str(cfg), "--N", "16"], env={"TVC_N": "64"}) == 0
    assert json.loads(capsys.readouterr().out)["params"]["N"] == 16


def test_unknown_config_keys_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"Nx": 32}))
    assert run(["bounds", "--config", str(cfg)]) == 1
    assert run(["bounds"], env={"TVC_NOPE": "1"}) == 1


def test_covering_command(capsys):
    assert run(["covering", "--N", "3", "--radii", "0.5,1", "--tiny", "true", "--b", "0"]) == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    assert all(r["log_greedy_upper"] <= r["thm1"] for r in rows)


def test_step_example_command(capsys):
    assert run(["step-example", "--trials", "1000"]) == 0
    assert json.loads(capsys.readouterr().out)["exact_rate"] == pytest.approx(0.7)


def test_bv_check_command(tmp_path, capsys):
    out = tmp_path / "bv"
    assert run(["bv-check", "--J-max", "3", "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["violations"] == 0
    assert (out / "bv_check.csv").exists() and (out / "bv_check.svg").exists()
    assert (out / "manifest.json").exists()


def test_sweep_command(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert run(["sweep-density", "--N", "16", "--rhos", "0.4,0.8", "--realizations", "2",
                "--out", str(out)]) == 0
    for name in ("report.json", "summary.csv", "plot.svg", "manifest.json"):
        assert (out / name).exists()
    assert tio.read_json(out / "manifest.json")["sweep_config"]["N"] == 16


def test_thm4_command(tmp_path, capsys):
    out = tmp_path / "thm4"
    assert run(["thm4-pipeline", "--J", "3", "--trials", "2", "--out", str(out)]) == 0
    assert (out / "report.json").exists()
    assert run(["thm4-pipeline", "--function", "nope", "--out", str(out)]) == 1


def test_field_json_roundtrip(rng):
    u = rng.random((3, 4))
    assert np.array_equal(tio.field_from_json(json.loads(json.dumps(tio.field_to_json(u, 1.0)))), u)
    with pytest.raises(ParameterError):
        tio.field_from_json({"shape": [2, 2], "values": [1, 2, 3]})


def test_problem_from_field(rng):
    f = rng.random((4, 4))
    s = sample_uniform_subset(16, 5, 0)
    obj = {"field": tio.field_to_json(f), "samples": s.to_json(), "eta": 0.0}
    p = tio.problem_from_json(obj)
    assert np.allclose(p.g, f.reshape(-1)[s.indices])
    with pytest.raises(ParameterError):
        tio.problem_from_json({"g": [0.1]})
