import json
import subprocess
import sys
from pathlib import Path

import pytest

from wkam.cli import RunSummary, main
from wkam.config import ExperimentConfig, apply_overrides, config_from_dict, load_config
from wkam.errors import ConfigurationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", ["free_kinetic", "pendulum", "time_forced", "time_forced_example2"])
def test_shipped_configs_load(name):
    cfg = load_config(CONFIGS / f"{name}.json")
    assert cfg.name == name
    cfg.build_model(), cfg.build_grid()
    assert config_from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_defaults_are_valid():
    cfg = config_from_dict({})
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.omega() is None


def test_error_names_the_key():
    with pytest.raises(ConfigurationError, match=r"grid\.n_t"):
        config_from_dict({"grid": {"n_t": 0}})
    with pytest.raises(ConfigurationError, match=r"grid\.n_t"):
        config_from_dict({"grid": {"n_t": 2.5}})
    with pytest.raises(ConfigurationError, match=r"unknown key solver\.n_mx"):
        config_from_dict({"solver": {"n_mx": 3}})
    with pytest.raises(ConfigurationError, match=r"lagrangian\.kind"):
        config_from_dict({"lagrangian": {"kind": "relativistic"}})


def test_overrides():
    data = apply_overrides({"grid": {"n_t": 8}}, ["grid.n_t=16", "solver.alpha=0.5", "name=abc"])
    assert data == {"grid": {"n_t": 16}, "solver": {"alpha": 0.5}, "name": "abc"}
    with pytest.raises(ConfigurationError):
        apply_overrides({}, ["grid.n_t"])


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"grid": {"n_t": 4,}}')
    with pytest.raises(ConfigurationError, match="line 1"):
        load_config(p)
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.json")


def test_run_summary():
    s = RunSummary({})
    assert s.check("a", 0.1, 0.2) and not s.check("b", 0.3, 0.2)
    assert s.failures() == ["b"] and not s.passed
    with pytest.raises(ValueError):
        s.check("a", 0.0, 1.0)


def _cfg(tmp_path, name, **over):
    data = json.loads((CONFIGS / f"{name}.json").read_text())
    data["output_prefix"] = str(tmp_path / name)
    for k, v in over.items():
        data = apply_overrides(data, [f"{k}={json.dumps(v)}"])
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_critical_value_command(tmp_path, capsys):
    cfg = _cfg(tmp_path, "free_kinetic", **{"grid.n_per_dim": 32, "solver.alpha_n_max": 1,
                                            "solver.alpha_n_iters": 8})
    assert main(["critical-value", "--config", cfg]) == 0
    csv_path = tmp_path / "free_kinetic.alpha.csv"
    assert csv_path.read_text().splitlines()[0] == "method,n,estimate,M_n,m_n"
    meta = json.loads((tmp_path / "free_kinetic.alpha.csv.meta.json").read_text())
    assert meta["config"]["grid"]["n_per_dim"] == 32 and "version" in meta
    report = json.loads((tmp_path / "free_kinetic.alpha.json").read_text())
    assert report["discrepancy"] == 0.0
    assert "PASS alpha_discrepancy" in capsys.readouterr().out


def test_weak_kam_and_minimizer_commands(tmp_path):
    cfg = _cfg(tmp_path, "pendulum", **{"grid.n_per_dim": 64, "solver.n_max": 16, "solver.horizon": 2.0,
                                        "solver.alpha": 1.0})
    summary = tmp_path / "s.json"
    assert main(["weak-kam", "--config", cfg, "--summary", str(summary)]) == 0
    data = json.loads(summary.read_text())
    assert data["passed"] and data["alpha"] == {"configured": 1.0}
    assert (tmp_path / "pendulum.backward.csv").exists()
    assert main(["minimizer", "--config", cfg]) == 0
    report = json.loads((tmp_path / "pendulum.minimizer.json").read_text())
    assert 0 in report["bset"] and report["x0_index"] == 0 and report["action_defect"] <= 1e-12


def test_equivariance_and_validate_commands(tmp_path):
    cfg = _cfg(tmp_path, "time_forced", **{"grid.n_per_dim": 32, "grid.n_t": 16, "solver.n_burn": 2,
                                           "solver.n_max": 6, "solver.alpha_n_max": 1})
    assert main(["equivariance", "--config", cfg, "--s", "0.25"]) == 0
    assert main(["equivariance", "--config", cfg, "--s", "0.3"]) == 2
    assert main(["validate", "--config", cfg]) == 0


def test_sample_omega_is_seeded(tmp_path, capsys):
    cfg = _cfg(tmp_path, "time_forced")
    main(["sample-omega", "--config", cfg, "--omega-seed", "7"])
    first = capsys.readouterr().out
    main(["sample-omega", "--config", cfg, "--omega-seed", "7"])
    assert capsys.readouterr().out == first
    assert json.loads(first)["seed"] == 7
    assert main(["sample-omega", "--config", _cfg(tmp_path, "pendulum")]) == 2


def test_exit_codes(tmp_path, monkeypatch):
    assert main(["weak-kam", "--config", _cfg(tmp_path, "free_kinetic", **{"grid.n_t": 0})]) == 2
    assert main(["weak-kam", "--config", str(tmp_path / "nope.json")]) == 2
    assert main(["reproduce", "--suite", "nightly"]) == 2
    assert main(["bogus"]) == 2
    # a wrong critical value makes the corrected iterates drift
    assert main(["weak-kam", "--config", _cfg(tmp_path, "free_kinetic", **{"solver.alpha": 0.5,
                                                                          "solver.n_max": 12})]) == 1
    monkeypatch.setenv("WKAM_THREADS", "zero")
    assert main(["validate", "--config", _cfg(tmp_path, "pendulum")]) == 2


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "wkam.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("wkam ")
