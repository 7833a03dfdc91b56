"""The acceptance matrix: one function per criterion, each returning a CriterionResult."""
from __future__ import annotations

import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .action import (Propagator, VelocityCapWarning, action_kernel, action_to_target, extract_minimizer,
                     kink_multiplicity_report, refine_minimizer, second_differences, semiconcavity_constant,
                     superdifferential_momenta)
from .critical import (alpha_closed_curves, alpha_ensemble, alpha_subadditive, barrier_diagonal,
                       closed_measure_defect, shift_consistency)
from .lagrangian import LagrangianModel
from .minimizers import (b_set, calibration_of_orbit, launch_minimizer, perturb_orbit, theta_flow_check,
                         unit_windows, verify_global_minimizer)
from .omega import (SkewProductSystem, check_group_law, check_inverse, check_measure_preservation,
                    omega_from_seed, theta)
from .torus import SpaceGrid
from .weak_kam import (BACKWARD, FORWARD, bound_constants, calibration_check, equivariance_check, hj_residual,
                       lipschitz_in_lambda_check, weak_kam_solve)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed, "values": self.values}

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.name}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def forced(amplitude: float, phase_map: str = "example1") -> LagrangianModel:
    """h(tau) = A (1 + sin 2 pi tau)."""
    return LagrangianModel.time_forced(((0, amplitude, 0.0), (1, 0.0, amplitude)), phase_map=phase_map)


def constant_curve_alpha(model, omega, grid, n_t) -> float:
    """Brute-force oracle: -min over nodes of the one-period action of the constant curve."""
    pts = grid.centered_points().reshape(-1, grid.d)
    zero = np.zeros((1, grid.d))
    total = sum(model.lagrangian(pts, zero, k / n_t, omega) for k in range(n_t)) / n_t
    return float(-np.min(total))


# -- 1 -------------------------------------------------------------------------------------------
@_timed
def criterion_1(threads: int = 1) -> CriterionResult:
    sys_ = SkewProductSystem.interval_exchange()
    omega = omega_from_seed(sys_, 0)
    grid = SpaceGrid(64)
    vals, ok = {}, True
    for A in (0.5, 1.0, 2.0):
        model = forced(A)
        t = time.perf_counter()
        a = alpha_closed_curves(omega, model, grid, 64, n_max=4, threads=threads).value
        b = alpha_subadditive(omega, model, grid, 64, n_iters=16, threads=threads).value
        secs = time.perf_counter() - t
        oracle = constant_curve_alpha(model, omega, grid, 64)
        good = abs(a + A) <= 0.02 and abs(b + A) <= 0.02 and secs < 30 and abs(oracle + A) <= 0.02
        vals[f"A={A}"] = {"closed": a, "subadditive": b, "oracle": oracle, "seconds": secs}
        ok &= good
    return CriterionResult(1, "critical value of the time-forced family", bool(ok), vals)


# -- 2 -------------------------------------------------------------------------------------------
@_timed
def criterion_2(threads: int = 1) -> CriterionResult:
    model = LagrangianModel.pendulum()
    grid = SpaceGrid(256)
    t = time.perf_counter()
    a = alpha_closed_curves(None, model, grid, 64, n_max=6, threads=threads).value
    b = alpha_subadditive(None, model, grid, 64, n_iters=16, threads=threads).value
    secs = time.perf_counter() - t
    oracle = constant_curve_alpha(model, None, grid, 64)
    ok = abs(a - 1) <= 0.05 and abs(b - 1) <= 0.05 and abs(a - b) <= 0.05 and secs < 180
    ok &= abs(oracle - 1) <= 0.05
    return CriterionResult(2, "critical value of the pendulum", bool(ok),
                           {"closed": a, "subadditive": b, "oracle": oracle, "discrepancy": abs(a - b),
                            "seconds": secs})


# -- 3 -------------------------------------------------------------------------------------------
@_timed
def criterion_3(threads: int = 1) -> CriterionResult:
    sys_ = SkewProductSystem.torus_rotation(2, (), 2, (1, 0, 3, 2))
    model = forced(1.0, "example2_pi")
    grid = SpaceGrid(64)
    ens = alpha_ensemble(sys_, model, list(range(16)), "closed", grid, 64, n_max=2, threads=threads)
    shifts = {}
    for seed in (0, 1):
        omega = omega_from_seed(sys_, seed)
        for s in (0.25, 1.0):
            for method, kw in (("closed", {"n_max": 2}), ("subadditive", {"n_iters": 8})):
                shifts[f"seed={seed},s={s},{method}"] = shift_consistency(sys_, omega, s, model, method, grid,
                                                                          64, threads=threads, **kw)
    ok = ens.spread <= 1e-3 and max(shifts.values()) <= 1e-6
    return CriterionResult(3, "ergodic constancy of alpha", bool(ok),
                           {"spread": ens.spread, "std": ens.std, "max_shift_defect": max(shifts.values()),
                            "shifts": shifts})


# -- 4 -------------------------------------------------------------------------------------------
def exact_forced_solution(model, omega, alpha, n_t: int) -> np.ndarray:
    """u(t_k) = int_0^t h(tau + phase) dtau + alpha t, for A (1 + sin)."""
    t = np.arange(n_t) / n_t
    phase = model.phase(omega)
    A = model.h_coeffs[0][1]
    integral = A * t + A * (np.cos(2 * np.pi * phase) - np.cos(2 * np.pi * (t + phase))) / (2 * np.pi)
    return integral + alpha * t


@_timed
def criterion_4(threads: int = 1) -> CriterionResult:
    sys_ = SkewProductSystem.interval_exchange()
    omega = omega_from_seed(sys_, 0)
    model = forced(1.0)
    res = {}
    for n in (64, 128):
        grid = SpaceGrid(n)
        alpha = alpha_closed_curves(omega, model, grid, n, n_max=2, threads=threads).value
        sol = weak_kam_solve(omega, model, grid, n, alpha, n_burn=4, n_max=12, threads=threads)
        exact = exact_forced_solution(model, omega, alpha, n)
        u = sol.normalized()
        err = float(np.max(np.abs(u - exact[:, None])))
        r = float(max(np.max(hj_residual(sol)), 0.0))
        res[n] = {"alpha": alpha, "sup_error": err, "residual": r}
    ratio = res[64]["residual"] / res[128]["residual"]
    ok = res[64]["sup_error"] <= 0.02 and res[64]["residual"] <= 0.05 and ratio >= 1.5
    return CriterionResult(4, "viscosity property on the closed-form benchmark", bool(ok),
                           {"grid64": res[64], "grid128": res[128], "refinement_ratio": ratio})


# -- benchmarks shared by 5 and 6 ------------------------------------------------------------
def benchmarks():
    sys1 = SkewProductSystem.interval_exchange()
    om1 = omega_from_seed(sys1, 0)
    return [
        ("free_kinetic", LagrangianModel.free_kinetic(), None, SpaceGrid(64), 16),
        ("time_forced", forced(1.0), om1, SpaceGrid(64), 64),
        ("pendulum", LagrangianModel.pendulum(), None, SpaceGrid(128), 16),
    ]


@_timed
def criterion_5(threads: int = 1) -> CriterionResult:
    vals, ok = {}, True
    for name, model, omega, grid, n_t in benchmarks():
        alpha = alpha_closed_curves(omega, model, grid, n_t, n_max=2, w_max=1, threads=threads).value
        for direction in (BACKWARD, FORWARD):
            sol = weak_kam_solve(omega, model, grid, n_t, alpha, n_burn=8, n_max=32, direction=direction,
                                 threads=threads)
            cal, dom = calibration_check(sol)
            vals[f"{name}/{direction}"] = {"calibration": cal, "domination": dom}
            ok &= cal <= 0.02 and dom <= 1e-12
    sys1 = SkewProductSystem.interval_exchange()
    om1 = omega_from_seed(sys1, 0)
    model = forced(1.0)
    shift = {}
    for s in (0.25, 1.0):
        d, per = equivariance_check(sys1, om1, s, model, SpaceGrid(64), 64, -1.0, n_burn=4, n_max=12,
                                    threads=threads)
        shift[s] = d
        ok &= d <= 1e-10 and per == 0.0
    lip = lipschitz_in_lambda_check(np.zeros(64), om1, model, SpaceGrid(64), 64, -1.0,
                                    [(0.0, 0.25), (0.25, 1.0), (1.0, 2.5), (0.5, 3.0), (0.0, 4.0)])
    ok &= lip <= 1.05
    vals.update({"shift_defect": shift, "periodicity_defect": 0.0, "lipschitz_ratio": lip})
    return CriterionResult(5, "calibration, equivariance, periodicity and Lipschitz identities", bool(ok), vals)


# -- 6 -------------------------------------------------------------------------------------------
@_timed
def criterion_6(threads: int = 1) -> CriterionResult:
    vals, ok = {}, True
    for name, model, omega, grid, n_t in benchmarks():
        alpha = alpha_closed_curves(omega, model, grid, n_t, n_max=2, w_max=1, threads=threads).value
        sol = weak_kam_solve(omega, model, grid, n_t, alpha, n_burn=1, n_max=128, threads=threads)
        band, K = sol.band(), sol.oscillation()
        vals[name] = {"band": band, "K": K, "alpha": alpha}
        ok &= band <= 2 * K + 1e-12
    return CriterionResult(6, "bounded corrected iterates up to 128 periods", bool(ok), vals)


# -- 7 -------------------------------------------------------------------------------------------
@_timed
def criterion_7(threads: int = 1) -> CriterionResult:
    vals, ok = {}, True
    for name, model in (("free_kinetic", LagrangianModel.free_kinetic()), ("pendulum", LagrangianModel.pendulum())):
        consts = {}
        for n, n_t in ((64, 8), (128, 16), (256, 32)):
            grid = SpaceGrid(n)
            v_cap = 3.5 if n_t == 8 else 4.0
            x0 = n // 4
            slice_ = action_to_target(0.0, 1.0, x0, None, model, grid, n_t, v_cap)
            consts[n] = semiconcavity_constant(slice_, grid, 1 / 8)
        c = list(consts.values())
        stable = max(c) / min(c) <= 2 and min(c) > 0
        vals[name] = {"C": consts, "stable": stable}
        ok &= stable
    grid = SpaceGrid(256)
    free = LagrangianModel.free_kinetic()
    mom = superdifferential_momenta(0.0, 0.0, 1.0, 0.5, None, free, restarts=3)
    mom_vals = sorted(float(m[0]) for m in mom)
    two = len(mom_vals) == 2 and abs(mom_vals[0] + 0.5) <= 0.02 and abs(mom_vals[1] - 0.5) <= 0.02
    corr = {}
    for name, model in (("free_kinetic", free), ("pendulum", LagrangianModel.pendulum())):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", VelocityCapWarning)
            ker = action_kernel(0.0, 1.0, None, model, grid, 8, 3.5, sources=[0], keep_backpointers=False)
        nodes = [32, 64, 96, 112, 120, 128, 136, 144, 160, 192, 224]
        recs, median = kink_multiplicity_report(ker, 0, nodes, 1 / 32, restarts=2)
        match = all(r.is_kink == (r.n_momenta >= 2) for r in recs)
        corr[name] = {"median": median, "match": match,
                      "nodes": {r.x_index: [r.n_momenta, r.second_difference] for r in recs},
                      "antipodal_kink": next(r.is_kink for r in recs if r.x_index == 128)}
        ok &= match and corr[name]["antipodal_kink"]
    ok &= two
    vals.update({"antipodal_momenta": mom_vals, "correspondence": corr})
    return CriterionResult(7, "semiconcavity, superdifferentials and kink correspondence", bool(ok), vals)


# -- 8 -------------------------------------------------------------------------------------------
@_timed
def criterion_8(threads: int = 1) -> CriterionResult:
    model = LagrangianModel.pendulum()
    grid, n_t = SpaceGrid(128), 16
    alpha = alpha_closed_curves(None, model, grid, n_t, n_max=2, w_max=1, threads=threads).value
    u = weak_kam_solve(None, model, grid, n_t, alpha, n_burn=8, n_max=32, threads=threads)
    up = weak_kam_solve(None, model, grid, n_t, alpha, n_burn=8, n_max=32, direction=FORWARD, threads=threads)
    bs = b_set(u, up, 0.0, 0.02)
    orbit = launch_minimizer(0, 0.0, u, up, None, model, 8.0, bset=bs)
    windows = unit_windows(0.0, 8.0)
    defect, _ = verify_global_minimizer(orbit, None, model, windows, grid, n_t)
    back, fwd = calibration_of_orbit(orbit, u, up, None, alpha, windows, model)
    bump = perturb_orbit(orbit, -4.0, -3.0, 0.1, model, None)
    excess = bump.window_action(-4.0, -3.0, model, None) - orbit.window_action(-4.0, -3.0, model, None)
    bump_defect, _ = verify_global_minimizer(bump, None, model, windows, grid, n_t)
    bump_back, _ = calibration_of_orbit(bump, u, up, None, alpha, windows, model)
    ok = defect <= 0.05 and back <= 0.05 and fwd <= 0.05 and bump_defect > 0.004
    ok &= bump_back >= excess - 1e-9
    ok &= 0 in bs.nodes and 64 not in bs.nodes
    sys1 = SkewProductSystem.interval_exchange()
    om1 = omega_from_seed(sys1, 0)
    solver = {"n_burn": 4, "n_max": 12, "threads": threads}
    shift = {
        "time_forced": theta_flow_check(sys1, om1, 0.25, forced(1.0), SpaceGrid(64), 16, -1.0,
                                        solver=solver).defect,
        "pendulum": theta_flow_check(sys1, om1, 0.25, model, grid, n_t, alpha, solver=solver).defect,
    }
    ok &= max(shift.values()) <= 1e-8
    # B-set equivariance on a model whose potential moves with the phase
    moving = LagrangianModel.mechanical([(1, 1, 0.5)], phase_map="example1")
    g2, nt2 = SpaceGrid(64), 16
    a2 = alpha_closed_curves(om1, moving, g2, nt2, n_max=2, w_max=1).value
    exact = True
    for s in (0.25, 0.5):
        om2 = theta(sys1, s, om1)
        ua = weak_kam_solve(om1, moving, g2, nt2, a2, **solver)
        upa = weak_kam_solve(om1, moving, g2, nt2, a2, direction=FORWARD, **solver)
        ub = weak_kam_solve(om2, moving, g2, nt2, a2, **solver)
        upb = weak_kam_solve(om2, moving, g2, nt2, a2, direction=FORWARD, **solver)
        for t0 in (0.0, 0.25, 0.5):
            exact &= b_set(ub, upb, t0, 0.02).nodes == b_set(ua, upa, t0 + s, 0.02).nodes
    ok &= exact
    return CriterionResult(8, "global minimizers and their equivariance", bool(ok),
                           {"action_defect": defect, "calibration": [back, fwd], "perturbed_defect": bump_defect,
                            "perturbed_calibration": bump_back, "excess": excess, "bset": bs.nodes,
                            "theta_shift": shift, "bset_equivariant": exact})


# -- 9 -------------------------------------------------------------------------------------------
@_timed
def criterion_9(threads: int = 1) -> CriterionResult:
    vals, ok = {}, True
    loops = {
        "pendulum": (LagrangianModel.pendulum(), SpaceGrid(128), 32),
        "moving_potential": (LagrangianModel.mechanical([(1, 1, 0.5)]), SpaceGrid(128), 32),
    }
    for name, (model, grid, n_t) in loops.items():
        est = alpha_closed_curves(None, model, grid, n_t, n_max=2, w_max=1)
        arg = est.extras["argmax"]
        node, n = arg["node"], arg["n"]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", VelocityCapWarning)
            ker = action_kernel(0.0, float(n), None, model, grid, n_t, sources=[node])
        curve = refine_minimizer(extract_minimizer(ker, node, node), None, model)
        defect = closed_measure_defect(curve)
        vals[name] = {"alpha": est.value, "loop_node": node, "period": n, "defect": defect}
        ok &= defect <= 1e-2
    model, grid, n_t = LagrangianModel.pendulum(), SpaceGrid(128), 32
    alpha = alpha_closed_curves(None, model, grid, n_t, n_max=2, w_max=1).value
    diag = barrier_diagonal(None, model, alpha, grid, n_t, (4, 12), nodes=[0, 64], time_indices=[0],
                            threads=threads)
    vals["barrier"] = {"x=0": float(diag[0, 0]), "x=0.5": float(diag[0, 1])}
    ok &= diag[0, 0] <= 0.05 and diag[0, 1] >= 0.1
    return CriterionResult(9, "closed measures and the Peierls barrier", bool(ok), vals)


# -- 10 ------------------------------------------------------------------------------------------
@_timed
def criterion_10(threads: int = 2) -> CriterionResult:
    from .suites import reproduce_all
    systems = {"interval_exchange": SkewProductSystem.interval_exchange(),
               "torus_rotation": SkewProductSystem.torus_rotation(2, (), 2, (1, 0, 3, 2))}
    vals, ok = {}, True
    for name, sys_ in systems.items():
        g = check_group_law(sys_, 1000, 1)
        inv = check_inverse(sys_, 1000, 2)
        hist = check_measure_preservation(sys_, 0.73, 100_000, 10, 3)
        vals[name] = {"group_law": g, "inverse": inv, "histogram": hist}
        ok &= g <= 1e-12 and inv <= 1e-12 and hist <= 0.02
    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        for n in (1, max(2, threads)):
            summary = reproduce_all("smoke", Path(tmp) / f"t{n}", n)
            ok &= summary.passed
            root = Path(tmp) / f"t{n}" / "smoke"
            runs.append({p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*"))
                         if p.is_file() and p.name != "timings.json"})
        identical = runs[0] == runs[1]
    vals["bitwise_identical"] = identical
    ok &= identical
    return CriterionResult(10, "skew-product infrastructure and reproducibility", bool(ok), vals)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10]


def run_all(threads: int = 1) -> list:
    return [c(threads=threads) if c is not criterion_10 else c(threads=max(2, threads)) for c in CRITERIA]
