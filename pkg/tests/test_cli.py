import csv
import json
import math
import os

import numpy as np
import pytest

from stepbunch import cli
from stepbunch.profile import read_profile_csv

MODEL = {"m": 0.0, "n": 2.0, "gamma": 1.0, "epsilon": 0.05, "A": 1.0}


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def _run(tmp_path, command, cfg, capsys, *extra, out="out"):
    path = _write(tmp_path, cfg)
    code = cli.run([command, "--config", path, "--out", str(tmp_path / out), *extra])
    captured = capsys.readouterr()
    lines = captured.out.strip().splitlines()
    assert len(lines) == 1
    return code, json.loads(lines[0]), captured.err


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


# --- exit codes and parsing -------------------------------------------------

def test_unknown_command(capsys):
    assert cli.run(["frobnicate", "--config", "x.json"]) == cli.EXIT_USAGE
    assert "usage" in capsys.readouterr().err
    assert cli.run([]) == cli.EXIT_USAGE


def test_malformed_json_reports_position(tmp_path, capsys):
    path = _write(tmp_path, '{\n  "model": {"m": 0,,}\n}')
    code = cli.run(["minimize", "--config", path, "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == cli.EXIT_INVALID
    assert f"{path}:2:" in err


def test_missing_config_file(tmp_path, capsys):
    assert cli.run(["minimize", "--config", str(tmp_path / "none.json")]) == cli.EXIT_INVALID


def test_missing_config_flag(capsys):
    assert cli.run(["minimize"]) == cli.EXIT_INVALID


def test_exponent_constraint_message(tmp_path, capsys):
    cfg = {"model": dict(MODEL, m=1.5), "grid": {"N": 64}}
    code, summary, err = _run(tmp_path, "minimize", cfg, capsys)
    assert code == cli.EXIT_INVALID
    assert "-1 < m < 1 < n" in summary["message"]
    assert summary["status"] == "error"


@pytest.mark.parametrize("cfg", [
    {"model": MODEL, "grid": {"N": 64}, "bogus": 1},
    {"model": dict(MODEL, extra=1), "grid": {"N": 64}},
    {"model": MODEL, "grid": {"N": 100}},
    {"model": MODEL, "physical": {"alpha1": 1, "alpha2": 1, "a": 1, "m": 0, "n": 2}, "grid": {"N": 64}},
    {"grid": {"N": 64}},
    {"model": dict(MODEL, epsilon="big"), "grid": {"N": 64}},
    {"model": MODEL, "grid": {"N": 64}, "solver": {"tolerance": 1}},
    {"model": MODEL, "grid": {"N": 64}, "init": "spiral"},
    {"physical": {"alpha1": 1, "alpha2": 0.01, "a": 0.1, "m": 0, "n": 2, "F_ad": 0.5}, "grid": {"N": 64}},
])
def test_invalid_configs(tmp_path, capsys, cfg):
    code, summary, _ = _run(tmp_path, "minimize", cfg, capsys)
    assert code == cli.EXIT_INVALID


def test_threads_env(tmp_path, capsys, monkeypatch):
    cfg = {"kernel": {"m": 0.0, "N": 64}}
    monkeypatch.setenv("STEPBUNCH_THREADS", "zero")
    code, _, _ = _run(tmp_path, "kernel", cfg, capsys)
    assert code == cli.EXIT_INVALID
    monkeypatch.setenv("STEPBUNCH_THREADS", "0")
    code, _, _ = _run(tmp_path, "kernel", cfg, capsys)
    assert code == cli.EXIT_INVALID
    # the flag takes precedence over the environment
    code, _, _ = _run(tmp_path, "kernel", cfg, capsys, "--threads", "2")
    assert code == cli.EXIT_OK


# --- subcommands ------------------------------------------------------------

def test_kernel_dump(tmp_path, capsys):
    code, summary, _ = _run(tmp_path, "kernel", {"kernel": {"m": 0.0, "N": 64}}, capsys)
    assert code == cli.EXIT_OK
    assert summary["l1_norm"] == pytest.approx(math.log(2.0), rel=1e-10)
    with open(tmp_path / "out" / "kernel.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["z", "K", "Kprime"]
    z, K = float(rows[1][0]), float(rows[1][1])
    assert K == pytest.approx(-math.log(math.sin(math.pi * abs(z))), rel=1e-12)
    rep = _read_json(tmp_path / "out" / "kernel.json")
    assert rep["K_hat_1"] == pytest.approx(0.5, rel=1e-10)


def test_csv_format(tmp_path, capsys):
    _run(tmp_path, "kernel", {"kernel": {"m": 0.3, "N": 32}}, capsys)
    raw = (tmp_path / "out" / "multipliers.csv").read_bytes()
    assert b"\r" not in raw
    for line in raw.decode().splitlines()[1:]:
        v = line.split(",")[1]
        assert float(v) == float(format(float(v), ".17g"))
        assert v == format(float(v), ".17g")


def test_minimize_writes_profile_and_provenance(tmp_path, capsys):
    cfg = {"model": MODEL, "grid": {"N": 128}, "init": "uniform", "seed": 3}
    src = _write(tmp_path, cfg)
    before = open(src).read()
    code = cli.run(["minimize", "--config", src, "--out", str(tmp_path / "out")])
    summary = json.loads(capsys.readouterr().out)
    assert code == cli.EXIT_OK
    assert open(src).read() == before
    prof = read_profile_csv(str(tmp_path / "out" / "profile.csv"), 1.0)
    assert prof.N == 128
    rep = _read_json(tmp_path / "out" / "result.json")
    assert rep["config"]["model"]["epsilon"] == 0.05
    assert rep["config"]["solver"]["seed"] == 3
    assert rep["config_hash"] == summary["config_hash"] == cli.config_hash(rep["config"])
    assert rep["energy"]["total"] == pytest.approx(summary["total"], rel=0, abs=0)


def test_minimize_from_physical(tmp_path, capsys):
    cfg = {"physical": {"alpha1": 1.0, "alpha2": 0.01, "a": 0.1, "m": 0.0, "n": 2.0, "F_ad": 0.0}, "grid": {"N": 64},
           "solver": {"max_iters": 50}}
    code, summary, _ = _run(tmp_path, "minimize", cfg, capsys)
    assert code == cli.EXIT_OK
    rep = _read_json(tmp_path / "out" / "result.json")
    assert "physical" in rep["config"] and "model" in rep["config"]


def test_energy_of_written_profile(tmp_path, capsys):
    _run(tmp_path, "minimize", {"model": MODEL, "grid": {"N": 64}, "solver": {"max_iters": 20}}, capsys)
    result = _read_json(tmp_path / "out" / "result.json")
    cfg = {"model": MODEL, "profile": str(tmp_path / "out" / "profile.csv")}
    code, summary, _ = _run(tmp_path, "energy", cfg, capsys, out="e")
    assert code == cli.EXIT_OK
    assert summary["total"] == pytest.approx(result["energy"]["total"], rel=1e-14)


def test_evolve_with_snapshots(tmp_path, capsys):
    cfg = {"model": dict(MODEL, epsilon=0.5), "grid": {"N": 32},
           "evolve": {"T": 1e-3, "dt": 1e-4, "snapshot_interval": 5e-4}}
    code, summary, _ = _run(tmp_path, "evolve", cfg, capsys)
    assert code == cli.EXIT_OK
    assert summary["snapshots"] >= 2
    with open(tmp_path / "out" / "snapshots.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["index", "t", "file"]
    assert os.path.exists(tmp_path / "out" / rows[1][2])


def test_evolve_vacuum_exit_code(tmp_path, capsys):
    cfg = {"model": dict(MODEL, epsilon=0.01), "grid": {"N": 64},
           "init": {"type": "perturbed", "amplitude": 0.999},
           "evolve": {"T": 1e-4, "dt": 1e-6, "max_halvings": 3}}
    code, summary, _ = _run(tmp_path, "evolve", cfg, capsys)
    assert code == cli.EXIT_NUMERICAL
    assert summary["error"] == "DegenerateSlopeError"
    assert summary["time"] == 0.0
    assert os.path.exists(tmp_path / "out" / "failure_iterate.csv")


def test_evolve_steps_uniform(tmp_path, capsys):
    cfg = {"physical": {"alpha1": 1.0, "alpha2": 1e-4, "a": 0.1, "m": 0.0, "n": 2.0},
           "steps": {"Ns": 8, "L": 8.0}, "dynamics": {"t_end": 1.0}}
    code, summary, _ = _run(tmp_path, "evolve-steps", cfg, capsys)
    assert code == cli.EXIT_OK
    assert summary["reason"] == "completed"
    with open(tmp_path / "out" / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:2] == ["t", "x_0"]
    last = np.array(rows[-1][1:], dtype=float)
    assert np.max(np.abs(last - np.arange(8.0))) <= 1e-10


def test_evolve_steps_bunching_stops(tmp_path, capsys):
    cfg = {"physical": {"alpha1": 1.0, "alpha2": 1e-4, "a": 0.1, "m": 0.0, "n": 2.0},
           "steps": {"Ns": 8, "L": 8.0, "perturb": [[3, 0.1]]},
           "dynamics": {"t_end": 1e6, "min_spacing_stop": 0.1}}
    code, summary, _ = _run(tmp_path, "evolve-steps", cfg, capsys)
    assert code == cli.EXIT_OK
    assert summary["stopped_early"] and summary["reason"] == "min_spacing_stop"


def test_quadrature(tmp_path, capsys):
    cfg = {"m": 0.0, "p": 2}
    code, summary, _ = _run(tmp_path, "quadrature", cfg, capsys)
    assert code == cli.EXIT_OK
    assert summary["min_observed_order"] >= 3.8


def test_consistency(tmp_path, capsys):
    cfg = {"surface": {"A": 1.0, "delta": 0.05}, "interaction": {"m": 0.0, "n": 2.0, "gamma": 1.0},
           "a_list": [2.0 ** -k for k in range(4, 7)]}
    code, summary, _ = _run(tmp_path, "consistency", cfg, capsys)
    assert code == cli.EXIT_OK
    assert summary["strictly_decreasing"] is True


def test_scaling_is_byte_reproducible(tmp_path, capsys):
    cfg = {"model": dict(MODEL, epsilon=1e-2), "grid": {"N": 256}, "eps_list": [1e-1, 3e-2, 1e-2], "seed": 7}
    code, summary, _ = _run(tmp_path, "scaling", cfg, capsys, out="a")
    assert code == cli.EXIT_OK
    code, _, _ = _run(tmp_path, "scaling", cfg, capsys, "--threads", "2", out="b")
    assert code == cli.EXIT_OK
    a = (tmp_path / "a" / "scaling.csv").read_bytes()
    assert a == (tmp_path / "b" / "scaling.csv").read_bytes()
    assert a.decode().splitlines()[0] == "epsilon,E_min,R0,iterations"
    rep = _read_json(tmp_path / "a" / "scaling.json")
    assert len(rep["rows"]) == 3 and "band_reference" in rep


def test_scaling_resolution_error(tmp_path, capsys):
    cfg = {"model": MODEL, "grid": {"N": 64}, "eps_list": [1e-2, 1e-4]}
    code, summary, _ = _run(tmp_path, "scaling", cfg, capsys)
    assert code == cli.EXIT_INVALID and summary["error"] == "ResolutionError"


def test_evidence(tmp_path, capsys):
    cfg = {"model": dict(MODEL, epsilon=1.0), "grid": {"N": 64}, "seeds": 3}
    code, summary, _ = _run(tmp_path, "evidence", cfg, capsys)
    assert code == cli.EXIT_OK
    assert summary["max_symmetry_defect"] <= 1e-6
    rep = _read_json(tmp_path / "out" / "evidence.json")
    assert [r["seed"] for r in rep["runs"]] == [0, 1, 2]
