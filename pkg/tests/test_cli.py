import json

import numpy as np
import pytest

from qdsqueeze import cli
from qdsqueeze.cli import load_config, main
from qdsqueeze.errors import ConfigError, IntegrationError

FAST = ["--n-ph", "4", "--n-pl", "2"]


def _read(path):
    return np.genfromtxt(path, delimiter=",", names=True)


def test_pulse_vacuum_input(tmp_path):
    assert main(["pulse", "--squeeze-r", "0", "--t-end", "50", "--out", str(tmp_path)]) == 0
    assert np.abs(_read(tmp_path / "pulse.csv")["concurrence"]).max() <= 1e-8


def test_figure_2_peak_and_gnuplot(tmp_path):
    assert main(["figure", "2", "--t-end", "100", "--gnuplot", "--out", str(tmp_path)]) == 0
    d = _read(tmp_path / "pulse.csv")
    assert abs(d["t_fs"][np.argmax(d["concurrence"])] - 20) <= 10
    assert "plot" in (tmp_path / "figure2.gp").read_text()
    man = json.loads((tmp_path / "pulse_manifest.json").read_text())
    assert man["runs"]["pulse"]["params"]["n_ph"] == 6


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("QDSQUEEZE_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["pump", *FAST, "--t-end", "10"]) == 0
    assert (tmp_path / "env" / "pump.csv").exists()


def test_sweep_command(tmp_path):
    code = main(["sweep", *FAST, "--t-end", "30", "--axis1", "g_ab:50:100:2",
                 "--axis2", "epsilon:5:10:3", "--out", str(tmp_path)])
    assert code == 0
    assert len((tmp_path / "sweep.csv").read_text().splitlines()) == 1 + 6
    assert len((tmp_path / "sweep_optimal_epsilon.csv").read_text().splitlines()) == 1 + 2


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["pump", "--gamma-a", "-5", "--out", str(tmp_path)]) == 1
    cfg = tmp_path / "bad.ini"
    cfg.write_text("gamma_a_mev = -5\ng_ab = 3\nmystery = 1\nn_ph = two\n")
    assert main(["pump", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "unit-suffix mismatch" in err and "mystery" in err and "n_ph" in err and "gamma_a" in err


def test_load_config(tmp_path):
    empty = tmp_path / "empty.ini"
    empty.write_text("")
    cfg = load_config(empty)
    assert cfg.scenario == "pump" and cfg.overrides == {}
    assert cfg.base_params().g_ab == 100 and cfg.base_params().gamma_a == 10
    one = tmp_path / "one.ini"
    one.write_text("[run]\ngamma_a_mev = 40   # cavity loss\nt_end_fs = 250\n")
    cfg = load_config(one)
    assert cfg.overrides == {"gamma_a": 40.0} and cfg.t_end == 250
    neg = tmp_path / "neg.ini"
    neg.write_text("gamma_a_mev = -5\n")
    with pytest.raises(ConfigError):
        load_config(neg)


def test_convergence_exit_code(tmp_path):
    args = ["pump", "--n-ph", "4", "--epsilon", "25", "--t-end", "100", "--check-convergence"]
    assert main([*args, "--out", str(tmp_path)]) == 3


def test_integration_error_exit_code(tmp_path, monkeypatch):
    def boom(cfg):
        raise IntegrationError("trace drift", {"trace_err": 1.0})
    monkeypatch.setattr(cli, "run_scenario", boom)
    assert main(["pump", "--out", str(tmp_path)]) == 2


def test_truncation_is_config_error(tmp_path):
    assert main(["pulse", "--squeeze-r", "0.8", "--out", str(tmp_path)]) == 1


def test_validate_command(capsys):
    assert main(["validate"]) == 0
    assert "FAIL" not in capsys.readouterr().out
