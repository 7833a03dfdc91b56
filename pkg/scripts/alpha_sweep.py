"""Critical value estimates across grid resolutions for the pendulum and a forced family."""
import argparse

from wkam.critical import alpha_both
from wkam.lagrangian import LagrangianModel
from wkam.omega import SkewProductSystem, omega_from_seed
from wkam.torus import SpaceGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", default="32x16,64x16,128x32", help="comma separated NxNT pairs")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sys_ = SkewProductSystem.interval_exchange()
    models = {
        "pendulum": (LagrangianModel.pendulum(), None),
        "forced": (LagrangianModel.time_forced([(1, 0.0, 1.0), (0, 1.0, 1.0)]), omega_from_seed(sys_, args.seed)),
    }
    print("model,n_per_dim,n_t,closed,subadditive,discrepancy")
    for pair in args.grids.split(","):
        n, n_t = (int(v) for v in pair.split("x"))
        for name, (model, omega) in models.items():
            a, b = alpha_both(omega, model, SpaceGrid(n), n_t, n_max=2, w_max=1, n_iters=16)
            print(f"{name},{n},{n_t},{a.value:.6f},{b.value:.6f},{a.discrepancy:.2e}")


if __name__ == "__main__":
    main()
