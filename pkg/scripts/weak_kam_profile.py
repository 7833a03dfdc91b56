"""Pendulum weak KAM solution against the separatrix profile at several time steps."""
import argparse

import numpy as np

from wkam.lagrangian import LagrangianModel
from wkam.torus import SpaceGrid
from wkam.weak_kam import hj_residual, weak_kam_solve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--n-t", type=int, nargs="*", default=[8, 16, 32])
    ap.add_argument("--csv", default=None, help="write x,exact,u columns for the finest run")
    args = ap.parse_args()
    grid = SpaceGrid(args.n)
    x = grid.points()[:, 0]
    exact = 2 / np.pi * (1 - np.abs(np.cos(np.pi * x)))
    model = LagrangianModel.pendulum()
    print("n_t,sup_error,max_residual")
    for n_t in args.n_t:
        v_cap = 3.5 if 4.0 / n_t >= 0.5 else 4.0
        sol = weak_kam_solve(None, model, grid, n_t, 1.0, n_burn=8, n_max=32, v_cap=v_cap)
        u = sol.normalized()[0]
        print(f"{n_t},{np.max(np.abs(u - exact)):.5f},{np.max(hj_residual(sol)):.5f}")
    if args.csv:
        np.savetxt(args.csv, np.column_stack([x, exact, u]), delimiter=",", header="x,exact,u", comments="")


if __name__ == "__main__":
    main()
