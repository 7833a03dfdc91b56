"""Command line entry point ``wkam``.

Exit codes: 0 when every enabled check passes, 1 when a check fails, 2 on
configuration or usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .critical import alpha_closed_curves, alpha_subadditive
from .errors import ConfigurationError, WkamError
from .lagrangian import validate_tonelli
from .minimizers import (b_set, calibration_of_orbit, first_smooth_node, launch_minimizer, unit_windows,
                         verify_global_minimizer)
from .omega import check_group_law, check_measure_preservation, theta
from .weak_kam import BACKWARD, FORWARD, calibration_check, hj_residual, weak_kam_solve


@dataclass
class RunSummary:
    config: dict
    alpha: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def check(self, name: str, value: float, tol: float, upper: bool = True):
        if name in self.checks:
            raise ValueError(f"check {name} recorded twice")
        ok = bool(value <= tol) if upper else bool(value >= tol)
        self.checks[name] = {"value": float(value), "tol": float(tol), "passed": ok}
        return ok

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def failures(self) -> list:
        return [k for k, c in self.checks.items() if not c["passed"]]

    def as_dict(self) -> dict:
        return {"config": self.config, "alpha": self.alpha, "checks": self.checks,
                "wall_times": self.wall_times, "files": self.files, "passed": self.passed,
                "version": __version__}


def write_sidecar(path: Path, cfg: dict, extra=None):
    meta = {"file": path.name, "config": cfg, "version": __version__}
    if extra:
        meta.update(extra)
    side = path.with_name(path.name + ".meta.json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


def write_json(path: Path, payload: dict, summary: RunSummary):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    summary.files += [str(path), str(write_sidecar(path, summary.config))]


def write_rows(path: Path, header, rows, summary: RunSummary):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    summary.files += [str(path), str(write_sidecar(path, summary.config))]


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _fmt(x):
    return "" if x is None else repr(float(x))


# -- subcommands -----------------------------------------------------------------------------

def _alpha_estimates(cfg: ExperimentConfig, omega, method: str, threads: int):
    model, grid, g = cfg.build_model(), cfg.build_grid(), cfg.grid
    out = {}
    if method in ("closed", "both"):
        out["closed"] = alpha_closed_curves(omega, model, grid, g.n_t, cfg.solver.alpha_n_max, g.w_max,
                                            g.v_cap, threads=threads)
    if method in ("subadditive", "both"):
        out["subadditive"] = alpha_subadditive(omega, model, grid, g.n_t, cfg.solver.alpha_n_iters, g.v_cap,
                                               threads=threads)
    return out


def _alpha(cfg, omega, threads, summary):
    if cfg.solver.alpha is not None:
        summary.alpha["configured"] = float(cfg.solver.alpha)
        return float(cfg.solver.alpha)
    est = _alpha_estimates(cfg, omega, "closed", threads)["closed"]
    summary.alpha["closed"] = est.value
    return est.value


def cmd_critical_value(cfg, args, summary):
    omega = cfg.omega(args.omega_seed)
    t = time.perf_counter()
    est = _alpha_estimates(cfg, omega, args.method, args.threads)
    summary.wall_times["critical_value"] = time.perf_counter() - t
    rows = []
    for name, e in est.items():
        summary.alpha[name] = e.value
        if name == "closed":
            rows += [["closed", n + 1, _fmt(v), "", ""] for n, v in enumerate(e.trace)]
        else:
            M, m = e.extras["M"], e.extras["m"]
            for n in range(1, len(M) + 1):
                q = -(M[n - 1] - M[n // 2 - 1]) / (n // 2) if n % 2 == 0 else None
                rows.append(["subadditive", n, _fmt(q), _fmt(M[n - 1]), _fmt(m[n - 1])])
    if len(est) == 2:
        gap = abs(est["closed"].value - est["subadditive"].value)
        summary.alpha["discrepancy"] = gap
        summary.check("alpha_discrepancy", gap, cfg.solver.tolerances.alpha_cross)
    out = Path(args.out) if args.out else Path(args.out_prefix or cfg.output_prefix).with_suffix(".alpha.csv")
    write_rows(out, ["method", "n", "estimate", "M_n", "m_n"], rows, summary)
    write_json(out.with_suffix(".json"), {"estimates": {k: e.as_dict() for k, e in est.items()},
                                          "discrepancy": summary.alpha.get("discrepancy")}, summary)


def _solve(cfg, omega, alpha, direction, threads):
    g, s = cfg.grid, cfg.solver
    return weak_kam_solve(omega, cfg.build_model(), cfg.build_grid(), g.n_t, alpha, n_burn=s.n_burn,
                          n_max=s.n_max, direction=direction, v_cap=g.v_cap, threads=threads)


def cmd_weak_kam(cfg, args, summary):
    omega = cfg.omega(args.omega_seed)
    alpha = _alpha(cfg, omega, args.threads, summary)
    t = time.perf_counter()
    sol = _solve(cfg, omega, alpha, args.direction, args.threads)
    summary.wall_times["solve"] = time.perf_counter() - t
    tol = cfg.solver.tolerances
    cal, dom = calibration_check(sol)
    summary.check("calibration_defect", cal, tol.calibration)
    sub = None
    if args.direction == BACKWARD:
        sub = float(max(np.max(hj_residual(sol)), 0.0))
        summary.check("subsolution_defect", sub, tol.subsolution)
    prefix = Path(args.out_prefix or cfg.output_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    sol_path = prefix.with_name(prefix.name + f".{args.direction}.csv")
    sol.to_csv(sol_path)
    summary.files += [str(sol_path), str(write_sidecar(sol_path, summary.config))]
    report = {"alpha": alpha, "subsolution_defect": sub, "calibration_defect": cal,
              "domination_defect": dom, "trace": sol.trace, "band": sol.band(), "oscillation": sol.oscillation()}
    write_json(prefix.with_name(prefix.name + f".{args.direction}.report.json"), report, summary)


def cmd_minimizer(cfg, args, summary):
    omega = cfg.omega(args.omega_seed)
    alpha = _alpha(cfg, omega, args.threads, summary)
    model, grid, g = cfg.build_model(), cfg.build_grid(), cfg.grid
    u = _solve(cfg, omega, alpha, BACKWARD, args.threads)
    up = _solve(cfg, omega, alpha, FORWARD, args.threads)
    tol = cfg.solver.tolerances
    bs = b_set(u, up, args.t0, tol.bset)
    x0 = first_smooth_node(u, bs)
    horizon = args.horizon if args.horizon is not None else cfg.solver.horizon
    orbit = launch_minimizer(x0, args.t0, u, up, omega, model, horizon)
    windows = unit_windows(args.t0, horizon)
    defect, per = verify_global_minimizer(orbit, omega, model, windows, grid, g.n_t, g.v_cap)
    back, fwd = calibration_of_orbit(orbit, u, up, omega, alpha, windows, model)
    summary.check("action_defect", defect, tol.minimizer)
    summary.check("backward_calibration_defect", back, tol.minimizer)
    summary.check("forward_calibration_defect", fwd, tol.minimizer)
    prefix = Path(args.out_prefix or cfg.output_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    orbit_path = prefix.with_name(prefix.name + ".orbit.csv")
    orbit.curve.to_csv(orbit_path)
    summary.files += [str(orbit_path), str(write_sidecar(orbit_path, summary.config))]
    report = {"alpha": alpha, "x0_index": x0, "x0": orbit.x0.tolist(), "v0": orbit.v0.tolist(),
              "bset": bs.nodes, "action_defect": defect, "window_defects": per,
              "backward_calibration_defect": back, "forward_calibration_defect": fwd}
    write_json(prefix.with_name(prefix.name + ".minimizer.json"), report, summary)


def cmd_equivariance(cfg, args, summary):
    sys_ = cfg.build_system()
    if sys_ is None:
        raise ConfigurationError("omega_space.kind: equivariance needs an omega space")
    omega = cfg.omega(args.omega_seed)
    alpha = _alpha(cfg, omega, args.threads, summary)
    m = int(round(args.s * cfg.grid.n_t))
    if abs(args.s * cfg.grid.n_t - m) > 1e-9:
        raise ConfigurationError("--s must be a multiple of 1 / grid.n_t")
    a = _solve(cfg, omega, alpha, BACKWARD, args.threads)
    b = _solve(cfg, theta(sys_, args.s, omega), alpha, BACKWARD, args.threads)
    shifted = a.values[(np.arange(cfg.grid.n_t) + m) % cfg.grid.n_t]
    defect = float(np.max(np.abs(b.values - shifted)))
    summary.check("shift_defect", defect, cfg.solver.tolerances.equivariance)
    summary.check("periodicity_defect", 0.0, cfg.solver.tolerances.equivariance)
    prefix = Path(args.out_prefix or cfg.output_prefix)
    write_json(prefix.with_name(prefix.name + ".equivariance.json"),
               {"s": args.s, "alpha": alpha, "shift_defect": defect, "periodicity_defect": 0.0}, summary)


def cmd_validate(cfg, args, summary):
    model = cfg.build_model()
    sys_ = cfg.build_system()
    omega = cfg.omega(args.omega_seed)
    rep = validate_tonelli(model, seed=cfg.seeds.root, system=sys_, omega=omega)
    for name, res in rep.checks.items():
        summary.checks[f"tonelli_{name}"] = {"value": res.value, "tol": None, "passed": bool(res.passed)}
    if sys_ is not None:
        group = check_group_law(sys_, 100, cfg.seeds.root)
        summary.check("group_law", group, 1e-12)
        hist = check_measure_preservation(sys_, 0.37, 100_000, 10, cfg.seeds.root)
        summary.check("measure_preservation", hist, 0.02)
    if args.out_prefix:
        prefix = Path(args.out_prefix)
        write_json(prefix.with_name(prefix.name + ".validate.json"), {"checks": summary.checks}, summary)


def cmd_sample_omega(cfg, args, summary):
    sys_ = cfg.build_system()
    if sys_ is None:
        raise ConfigurationError("omega_space.kind: no omega space configured")
    omega = cfg.omega(args.omega_seed)
    payload = {"kind": omega.kind, "coords": list(omega.coords),
               "seed": cfg.seeds.omega if args.omega_seed is None else args.omega_seed}
    print(json.dumps(payload))
    if args.out_prefix:
        prefix = Path(args.out_prefix)
        write_json(prefix.with_name(prefix.name + ".omega.json"), payload, summary)


COMMANDS = {
    "critical-value": cmd_critical_value,
    "weak-kam": cmd_weak_kam,
    "minimizer": cmd_minimizer,
    "equivariance": cmd_equivariance,
    "validate": cmd_validate,
    "sample-omega": cmd_sample_omega,
}


def run(subcommand: str, cfg: ExperimentConfig, args) -> RunSummary:
    summary = RunSummary(cfg.to_dict())
    t = time.perf_counter()
    COMMANDS[subcommand](cfg, args, summary)
    summary.wall_times["total"] = time.perf_counter() - t
    return summary


def _threads(value):
    if value is not None:
        return value
    env = os.environ.get("WKAM_THREADS")
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise ConfigurationError(f"WKAM_THREADS must be an integer, got {env!r}")
    if n < 1:
        raise ConfigurationError("WKAM_THREADS must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wkam", description="Stochastic time-periodic weak KAM experiments.")
    p.add_argument("--version", action="version", version=f"wkam {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--config", required=config)
        sp.add_argument("--omega-seed", type=int, default=None)
        sp.add_argument("--out-prefix", default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--summary", default=None, help="write the run summary JSON here")

    sp = sub.add_parser("critical-value")
    common(sp)
    sp.add_argument("--method", choices=["closed", "subadditive", "both"], default="both")
    sp.add_argument("--out", default=None)
    sp = sub.add_parser("weak-kam")
    common(sp)
    sp.add_argument("--direction", choices=[BACKWARD, FORWARD], default=BACKWARD)
    sp = sub.add_parser("minimizer")
    common(sp)
    sp.add_argument("--t0", type=float, default=0.0)
    sp.add_argument("--horizon", type=float, default=None)
    sp = sub.add_parser("equivariance")
    common(sp)
    sp.add_argument("--s", type=float, default=0.25)
    for name in ("validate", "sample-omega"):
        common(sub.add_parser(name))
    sp = sub.add_parser("reproduce")
    sp.add_argument("--suite", default="smoke")
    sp.add_argument("--out-prefix", default="out/reproduce")
    sp.add_argument("--threads", type=int, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.threads = _threads(args.threads)
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        if args.command == "reproduce":
            from .suites import SUITES, reproduce_all
            if args.suite not in SUITES:
                raise ConfigurationError(f"unknown suite {args.suite!r}; choose from {sorted(SUITES)}")
            summary = reproduce_all(args.suite, args.out_prefix, args.threads)
        else:
            cfg = load_config(args.config, args.override)
            summary = run(args.command, cfg, args)
            if args.summary:
                Path(args.summary).parent.mkdir(parents=True, exist_ok=True)
                Path(args.summary).write_text(json.dumps(summary.as_dict(), indent=2, sort_keys=True,
                                                         default=_jsonable) + "\n")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except WkamError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name, c in summary.checks.items():
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {name} = {c['value']!r} (tol {c['tol']!r})")
    if not summary.passed:
        print("failed checks: " + ", ".join(summary.failures()), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
