"""Benchmark suites driving the CLI operations end to end."""
from __future__ import annotations

import argparse
import copy
import json
import time
from pathlib import Path

from .cli import RunSummary, _jsonable, run
from .config import config_from_dict
from .errors import ConfigurationError

BASE = {
    "free_kinetic": {
        "omega_space": {"kind": "none"},
        "lagrangian": {"kind": "free_kinetic"},
        "grid": {"n_per_dim": 32, "n_t": 16},
        "solver": {"n_burn": 4, "n_max": 12, "alpha_n_max": 2},
    },
    "time_forced": {
        "omega_space": {"kind": "interval_exchange"},
        "lagrangian": {"kind": "time_forced", "h_coeffs": [[0, 1.0, 0.0], [1, 0.0, 1.0]], "phase_map": "example1"},
        "grid": {"n_per_dim": 64, "n_t": 64},
        "solver": {"n_burn": 4, "n_max": 12, "alpha_n_max": 2},
    },
    "pendulum": {
        "omega_space": {"kind": "none"},
        "lagrangian": {"kind": "pendulum"},
        "grid": {"n_per_dim": 64, "n_t": 16, "w_max": 1},
        "solver": {"n_burn": 4, "n_max": 16, "alpha_n_max": 2, "horizon": 2.0},
    },
}

SMOKE = [
    ("validate", "free_kinetic", {}),
    ("validate", "time_forced", {}),
    ("critical-value", "free_kinetic", {"method": "both"}),
    ("critical-value", "time_forced", {"method": "both"}),
    ("critical-value", "pendulum", {"method": "both"}),
    ("weak-kam", "free_kinetic", {"direction": "backward"}),
    ("weak-kam", "time_forced", {"direction": "backward"}),
    ("weak-kam", "pendulum", {"direction": "backward"}),
    ("weak-kam", "pendulum", {"direction": "forward"}),
    ("minimizer", "pendulum", {"t0": 0.0, "horizon": 2.0}),
    ("equivariance", "time_forced", {"s": 0.25}),
]

SUITES = ("smoke", "full")


def _args(prefix: Path, threads: int, extra: dict):
    ns = argparse.Namespace(omega_seed=None, out_prefix=str(prefix), threads=threads, out=None,
                            method="both", direction="backward", t0=0.0, horizon=None, s=0.25)
    for k, v in extra.items():
        setattr(ns, k, v)
    return ns


def run_smoke(out_dir: Path, threads: int = 1) -> RunSummary:
    total = RunSummary({"suite": "smoke"})
    for i, (command, name, extra) in enumerate(SMOKE):
        data = copy.deepcopy(BASE[name])
        data["name"] = name
        cfg = config_from_dict(data)
        tag = f"{i:02d}_{command}_{name}"
        sub = run(command, cfg, _args(out_dir / tag, threads, extra))
        for check, rec in sub.checks.items():
            total.checks[f"{tag}/{check}"] = rec
        total.alpha.update({f"{tag}/{k}": v for k, v in sub.alpha.items()})
        total.files += sub.files
        total.wall_times[tag] = sub.wall_times.get("total")
    return total


def run_full(out_dir: Path, threads: int = 1) -> RunSummary:
    from .acceptance import run_all
    total = RunSummary({"suite": "full"})
    results = run_all(threads=threads)
    for r in results:
        total.checks[f"criterion_{r.number}"] = {"value": None, "tol": None, "passed": r.passed,
                                                 "name": r.name}
        total.wall_times[f"criterion_{r.number}"] = r.seconds
    table = out_dir / "acceptance.json"
    table.parent.mkdir(parents=True, exist_ok=True)
    table.write_text(json.dumps([r.as_dict() for r in results], indent=2, sort_keys=True,
                                default=_jsonable) + "\n")
    total.files.append(str(table))
    return total


def reproduce_all(suite: str, out_prefix="out/reproduce", threads: int = 1) -> RunSummary:
    """Run a named suite; summary and timings land next to the artifacts."""
    if suite not in SUITES:
        raise ConfigurationError(f"unknown suite {suite!r}; choose from {list(SUITES)}")
    out_dir = Path(out_prefix) / suite
    out_dir.mkdir(parents=True, exist_ok=True)
    t = time.perf_counter()
    summary = run_smoke(out_dir, threads) if suite == "smoke" else run_full(out_dir, threads)
    summary.wall_times["suite"] = time.perf_counter() - t
    payload = {"suite": suite, "checks": summary.checks, "alpha": summary.alpha, "passed": summary.passed}
    (out_dir / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    # timings are kept apart so every other file is reproducible byte for byte
    (out_dir / "timings.json").write_text(json.dumps(summary.wall_times, indent=2, sort_keys=True) + "\n")
    return summary
