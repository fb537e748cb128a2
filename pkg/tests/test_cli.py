import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from bohmflow import __version__, cli

SMALL = {
    "t_max_omega": 2.0,
    "output_dt_omega": 0.1,
    "n_traj": 300,
    "lattice": {"h": 0.1, "half_extent": 40},
    "beables": {"drift_samples": 20000},
    "concurrence": {"points": 21},
}


def write_config(tmp_path, **overrides):
    data = json.loads(json.dumps(SMALL))
    for key, value in overrides.items():
        if isinstance(value, dict):
            data.setdefault(key, {}).update(value)
        else:
            data[key] = value
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_state(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["state", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    doc = json.loads((out / "state.json").read_text())
    assert doc["version"] == __version__
    assert doc["config"]["epsilon"] == 0.4
    first = np.array(doc["matrices"][0])
    assert first.shape == (4, 4, 2)
    assert first[0, 3].tolist() == [pytest.approx(0.2), 0.0]
    assert len(doc["omega_t"]) == 21


def test_concurrence_sidecar(tmp_path):
    cfg = write_config(tmp_path, a=0.70710678, epsilon=0.4)
    assert cli.main(["concurrence", "--config", str(cfg), "--out", str(tmp_path), "--no-figures"]) == 0
    side = json.loads((tmp_path / "concurrence.json").read_text())
    assert side["gamma_t_sd"] == pytest.approx(math.log(7 / 6), abs=1e-6)
    assert side["epsilon_star"] == pytest.approx(1 / 3, abs=1e-6)
    assert any("0.026" in note for note in side["notes"])
    rows = read_csv(tmp_path / "concurrence.csv")
    assert rows[0] == ["gamma_t", "concurrence"]
    assert float(rows[1][1]) == pytest.approx(0.1, abs=1e-8)
    assert not (tmp_path / "concurrence.png").exists()


def test_concurrence_asymptotic_is_null(tmp_path):
    cfg = write_config(tmp_path, epsilon=1.0)
    assert cli.main(["concurrence", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    side = json.loads((tmp_path / "concurrence.json").read_text())
    assert side["gamma_t_sd"] is None and side["sudden_death"] == "asymptotic"
    assert (tmp_path / "concurrence.png").stat().st_size > 0


def test_straight_line_trajectories(tmp_path):
    cfg = write_config(tmp_path, epsilon=0.0, gamma_over_omega=0.0)
    assert cli.main(["trajectories", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "trajectories.csv")
    assert rows[0] == ["traj_id", "omega_t", "x1", "x2"]
    first = {}
    for tid, _, x1, _ in rows[1:]:
        first.setdefault(tid, float(x1))
        assert abs(float(x1) - first[tid]) <= 1e-12
    meta = json.loads((tmp_path / "trajectories.json").read_text())
    assert meta["truncated"] == [False] * 6
    assert meta["integrator"]["rtol"] == 1e-10
    assert len(meta["initial_conditions"]) == 6


def test_explicit_initial_conditions_and_round_trip_floats(tmp_path):
    cfg = write_config(tmp_path, initial_conditions=[[0.1, 0.3]])
    assert cli.main(["trajectories", "--config", str(cfg), "--out", str(tmp_path), "--no-figures"]) == 0
    rows = read_csv(tmp_path / "trajectories.csv")
    assert rows[1] == ["0", "0.0", "0.1", "0.3"]
    for row in rows[1:]:
        for text in row[1:]:
            assert repr(float(text)) == text


def test_amplitude(tmp_path):
    cfg = write_config(tmp_path, gamma_over_omega=0.0, t_max_omega=10.0)
    assert cli.main(["amplitude", "--config", str(cfg), "--out", str(tmp_path), "--no-figures"]) == 0
    rows = read_csv(tmp_path / "amplitude.csv")[1:]
    amps = [float(r[1]) for r in rows]
    assert amps[0] <= 1e-12
    assert max(amps) == amps[-1]


def test_beables_report(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["beables", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "beables.json").read_text())
    assert rep["flux_reconstruction_max_error"] <= 1e-12
    assert len(rep["marginal_tv"]["checkpoints"]) == 3
    assert rep["max_exit_probability"] < 0.1
    assert set(rep["drift_check"]) >= {"empirical", "analytic", "relative_error"}
    rows = read_csv(tmp_path / "beables.csv")
    assert rows[0] == ["walker_id", "omega_t", "n1", "n2"]
    assert len({r[0] for r in rows[1:]}) == 300


@pytest.mark.parametrize("command", ["trajectories", "beables"])
def test_byte_identical_reruns(tmp_path, command):
    cfg = write_config(tmp_path, initial_conditions="sampled", n_traj=200)
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert cli.main([command, "--config", str(cfg), "--out", str(out), "--seed", "17"]) == 0
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    for name in names:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_seed_override_changes_output(tmp_path):
    cfg = write_config(tmp_path, initial_conditions="sampled", n_traj=50)
    for seed in ("1", "2"):
        assert cli.main(["trajectories", "--config", str(cfg), "--out", str(tmp_path / seed), "--seed", seed,
                         "--no-figures"]) == 0
    assert (tmp_path / "1" / "trajectories.csv").read_bytes() != (tmp_path / "2" / "trajectories.csv").read_bytes()
    meta = json.loads((tmp_path / "2" / "trajectories.json").read_text())
    assert meta["seed"] == 2 and meta["config"]["seed"] == 2


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, initial_conditions="sampled", n_traj=4200, t_max_omega=0.5)
    blobs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("BOHMFLOW_THREADS", threads)
        out = tmp_path / threads
        assert cli.main(["trajectories", "--config", str(cfg), "--out", str(out), "--no-figures"]) == 0
        blobs.append((out / "trajectories.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, epsilon=2.0)
    assert cli.main(["state", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "epsilon" in capsys.readouterr().err


def test_negative_seed_rejected(tmp_path, capsys):
    assert cli.main(["state", "--out", str(tmp_path), "--seed", "-3"]) == 2
    assert "seed" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, nbar=0.5)
    assert cli.main(["trajectories", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["type"] == "UnsupportedTemperatureError"


def test_failed_validation_exit_code(tmp_path, monkeypatch, capsys):
    import bohmflow.validation as validation

    def fake_suite(cfg):
        return {"version": __version__, "config": cfg.to_dict(), "notes": [], "passed": False,
                "checks": [{"name": "demo", "passed": False, "measured": 1.0, "threshold": 0.5}]}

    monkeypatch.setattr(validation, "run_suite", fake_suite)
    assert cli.main(["validate", "--out", str(tmp_path)]) == 3
    captured = capsys.readouterr()
    assert "FAIL  demo" in captured.out
    assert json.loads(captured.err)["payload"]["failed"] == ["demo"]
    assert json.loads((tmp_path / "validate.json").read_text())["passed"] is False


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "bohmflow.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert __version__ in res.stdout
