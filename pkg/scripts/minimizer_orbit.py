"""Launch a global minimizer from a weak KAM pair and report its window defects."""
import argparse

from wkam.config import load_config
from wkam.minimizers import (b_set, calibration_of_orbit, first_smooth_node, launch_minimizer, unit_windows,
                             verify_global_minimizer)
from wkam.critical import alpha_closed_curves
from wkam.weak_kam import weak_kam_solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/pendulum.json")
    ap.add_argument("--t0", type=float, default=0.0)
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()
    cfg = load_config(args.config)
    model, grid, g, s = cfg.build_model(), cfg.build_grid(), cfg.grid, cfg.solver
    omega = cfg.omega()
    alpha = s.alpha if s.alpha is not None else alpha_closed_curves(omega, model, grid, g.n_t, 2, g.w_max).value
    kw = dict(n_burn=s.n_burn, n_max=s.n_max, v_cap=g.v_cap)
    u = weak_kam_solve(omega, model, grid, g.n_t, alpha, **kw)
    up = weak_kam_solve(omega, model, grid, g.n_t, alpha, direction="forward", **kw)
    bs = b_set(u, up, args.t0, s.tolerances.bset)
    x0 = first_smooth_node(u, bs)
    orbit = launch_minimizer(x0, args.t0, u, up, omega, model, s.horizon)
    windows = unit_windows(args.t0, s.horizon)
    worst, per = verify_global_minimizer(orbit, omega, model, windows, grid, g.n_t, g.v_cap)
    back, fwd = calibration_of_orbit(orbit, u, up, omega, alpha, windows, model)
    print(f"alpha = {alpha:.6f}, B-set size {len(bs.nodes)}, launch node {x0}, v0 = {orbit.v0.tolist()}")
    print(f"worst window defect {worst:.3e}; calibration defects {back:.3e} / {fwd:.3e}")
    for (a, b), d in zip(windows, per):
        print(f"  [{a:+.2f}, {b:+.2f}]  {d:.3e}")
    if args.csv:
        orbit.curve.to_csv(args.csv)


if __name__ == "__main__":
    main()
