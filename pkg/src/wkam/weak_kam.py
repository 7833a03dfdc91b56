"""Lax-Oleinik semigroups and liminf weak KAM solutions on M x one period.

Backward solutions use the forward-in-time operator
    T_lam u(x, t) = min_y u(y) + A(t - lam, y; t, x) + lam * alpha,
forward solutions use the cost-to-go operator
    T_lam,+ u(x, t) = min_y u(y) + A(t, x; t + lam, y) + lam * alpha.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .action import DEFAULT_V_CAP, Propagator, time_index
from .errors import DivergenceError, InvalidInputError, InvalidStateError
from .lagrangian import HamiltonianView, LagrangianModel, hamiltonian
from .omega import SkewProductSystem, theta
from .torus import SpaceGrid

BACKWARD = "backward"
FORWARD = "forward"


def _check_direction(direction):
    if direction not in (BACKWARD, FORWARD):
        raise InvalidInputError(f"direction must be 'backward' or 'forward', got {direction!r}")


@dataclass
class BoundConstants:
    """f = max |L(x, 0, t)| and C = max |L(x, v, t)| over |v| <= diameter, both on grid samples."""

    f: float
    C: float


def bound_constants(omega, model: LagrangianModel, grid: SpaceGrid, n_t: int, n_v: int = 21) -> BoundConstants:
    pts = grid.centered_points().reshape(-1, grid.d)
    times = np.arange(n_t) / n_t
    diam = 0.5 * np.sqrt(grid.d)
    axis = np.linspace(-diam, diam, n_v)
    vel = np.stack(np.meshgrid(*([axis] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
    vel = vel[np.linalg.norm(vel, axis=1) <= diam + 1e-12]
    f = C = 0.0
    zero = np.zeros((1, grid.d))
    for t in times:
        f = max(f, float(np.max(np.abs(model.lagrangian(pts, zero, t, omega)))))
        vals = model.lagrangian(pts[:, None, :], vel[None, :, :], t, omega)
        C = max(C, float(np.max(np.abs(vals))))
    return BoundConstants(f, C)


def lax_oleinik(u0, lam: float, t: float, omega, model: LagrangianModel, grid: SpaceGrid, n_t: int,
                alpha: float, direction: str = BACKWARD, v_cap: float = DEFAULT_V_CAP,
                propagator: Optional[Propagator] = None) -> np.ndarray:
    """T_lam u0 at time t (backward) or T_lam,+ u0 at time t (forward)."""
    _check_direction(direction)
    m = time_index(lam, n_t)
    if m < 0:
        raise InvalidInputError("lambda must be >= 0")
    k = time_index(t, n_t)
    prop = propagator or Propagator(model, omega, grid, n_t, v_cap)
    U = np.asarray(u0, dtype=float).reshape(grid.shape)
    if direction == BACKWARD:
        U = prop.propagate(U, k - m, m)
    else:
        U = prop.propagate(U, k + m, m, forward=True)
    return U + m * prop.dt * alpha


@dataclass
class WeakKamSolution:
    """Raw liminf-window values; values[k] is the slice at t_k = k / n_t."""

    values: np.ndarray
    direction: str
    alpha: float
    window: tuple
    trace: list
    levels: list
    grid: SpaceGrid
    n_t: int
    model: LagrangianModel = field(repr=False)
    omega: object = field(repr=False)
    v_cap: float = DEFAULT_V_CAP

    def normalized(self) -> np.ndarray:
        """Values minus the value at node 0, time 0."""
        return self.values - self.values[0].reshape(-1)[0]

    def slice(self, t: float) -> np.ndarray:
        return self.values[time_index(t, self.n_t) % self.n_t]

    @property
    def tail(self) -> float:
        return float(self.trace[-1]) if self.trace else 0.0

    def converged(self, tol: float = 1e-6) -> bool:
        return self.tail <= tol

    def propagator(self, threads: int = 1) -> Propagator:
        return Propagator(self.model, self.omega, self.grid, self.n_t, self.v_cap, threads=threads)

    def band(self) -> float:
        """Width of the band holding every corrected iterate T_n u0 + n alpha."""
        hi = max(M for _, M, _ in self.levels)
        lo = min(m for _, _, m in self.levels)
        return hi - lo

    def oscillation(self) -> float:
        """Largest oscillation max - min of a single corrected iterate."""
        return max(M - m for _, M, m in self.levels)

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = ["x_index"] if self.grid.d == 1 else ["x_index", "x2_index"]
            w.writerow(["t_index"] + cols + ["u"])
            for k in range(self.n_t):
                for idx in np.ndindex(*self.grid.shape):
                    w.writerow([k, *idx, repr(float(self.values[k][idx]))])


def weak_kam_solve(omega, model: LagrangianModel, grid: SpaceGrid, n_t: int, alpha: float, u0=None,
                   n_burn: int = 16, n_max: int = 128, direction: str = BACKWARD,
                   v_cap: float = DEFAULT_V_CAP, threads: int = 1, strict: bool = True) -> WeakKamSolution:
    """Running minimum of T_lam u0 over grid horizons lam in [n_burn, n_max] periods.

    Every start phase is carried at once: copy c holds u0 at time t_c and after j
    steps sits at time index c + j (c - j for the forward operator) with horizon
    lam = j * dt, so each slice of the result sees every horizon in the window.
    """
    _check_direction(direction)
    if not 0 <= n_burn < n_max:
        raise InvalidInputError("need 0 <= n_burn < n_max")
    prop = Propagator(model, omega, grid, n_t, v_cap, threads=threads)
    base = np.zeros(grid.shape) if u0 is None else np.asarray(u0, dtype=float).reshape(grid.shape)
    U = np.broadcast_to(base, (n_t,) + grid.shape).copy()
    starts = np.arange(n_t)
    forward = direction == FORWARD
    sign = -1 if forward else 1
    running = np.full((n_t,) + grid.shape, np.inf)
    trace, levels = [], []
    j = 0
    for n in range(1, n_max + 1):
        before = running.copy() if n > n_burn else None
        for _ in range(n_t):
            k = (starts - j - 1) if forward else (starts + j)
            U, _ = prop.step(U, k, forward=forward)
            U += prop.dt * alpha
            j += 1
            if j >= n_burn * n_t:
                # copy c now sits at slot (c + sign * j) mod n_t
                np.minimum(running, np.roll(U, sign * j, axis=0), out=running)
        levels.append((n, float(U.max()), float(U.min())))
        if before is not None and np.all(np.isfinite(before)):
            trace.append(float(np.max(before - running)))
    if strict:
        f = bound_constants(omega, model, grid, n_t).f
        osc = max(M - m for _, M, m in levels)
        mids = [0.5 * (M + m) for n, M, m in levels if n >= max(n_burn, 1)]
        drift = max(mids) - min(mids)
        if not np.all(np.isfinite(running)) or drift > 2 * osc + f + abs(alpha) + 1e-9:
            raise DivergenceError(f"corrected iterates drift by {drift:.4g} with alpha = {alpha!r}; "
                                  "alpha is probably not the critical value")
    return WeakKamSolution(running, direction, float(alpha), (n_burn, n_max), trace, levels,
                           grid, n_t, model, omega, v_cap)


# -- checks ---------------------------------------------------------------------------------

@dataclass
class ViscosityReport:
    subsolution_defect: float
    calibration_defect: float
    calibration_mean: float
    n_per_dim: int
    n_t: int
    residual: np.ndarray = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {"subsolution_defect": self.subsolution_defect, "calibration_defect": self.calibration_defect,
                "calibration_mean": self.calibration_mean, "n_per_dim": self.n_per_dim, "n_t": self.n_t}


def hj_residual(sol: WeakKamSolution, prop: Optional[Propagator] = None) -> np.ndarray:
    """r(x, t_k) = (u_k - u_{k-1}) / dt + H(x, D u_k, t_{k-1/2}) - alpha, k = 1..n_t.

    D u_k is one-sided along the incoming backward minimizer step (centered where
    the step does not move).  Only defined for backward solutions.
    """
    if sol.direction != BACKWARD:
        raise InvalidInputError("the HJ residual is computed for backward solutions")
    grid = sol.grid
    prop = prop or sol.propagator()
    dt, dx = prop.dt, grid.dx
    view = HamiltonianView(sol.model)
    pts = grid.centered_points()
    out = np.empty((sol.n_t,) + grid.shape)
    src_multi = np.stack(np.unravel_index(np.arange(grid.n_nodes), grid.shape), axis=-1)
    for k in range(1, sol.n_t + 1):
        prev = sol.values[k - 1]
        cur = sol.values[k % sol.n_t]
        _, src = prop.step(prev, k - 1, track=True)
        src_multi_k = src_multi[src.reshape(-1)]
        here = src_multi
        step = (here - src_multi_k + grid.n_per_dim // 2) % grid.n_per_dim - grid.n_per_dim // 2
        p = np.zeros(grid.shape + (grid.d,))
        for ax in range(grid.d):
            back = (cur - np.roll(cur, 1, ax)) / dx
            fwd = (np.roll(cur, -1, ax) - cur) / dx
            cen = 0.5 * (back + fwd)
            s = step[:, ax].reshape(grid.shape)
            p[..., ax] = np.where(s > 0, back, np.where(s < 0, fwd, cen))
        t_mid = (k - 0.5) * dt
        H = hamiltonian(view, pts, p, t_mid, sol.omega)
        out[k - 1] = (cur - prev) / dt + H - sol.alpha
    return out


def calibration_check(sol: WeakKamSolution, s: float = 1.0, prop: Optional[Propagator] = None):
    """Return (max equality defect, max domination defect) of the lookback identity.

    For backward solutions compares u(., t) with min_y u(y, t - s) + K + s alpha at
    every node and time slice; the domination defect is max(u - rhs, 0).  Forward
    solutions use the time-mirrored identity.
    """
    prop = prop or sol.propagator()
    m = time_index(s, sol.n_t)
    if m <= 0:
        raise InvalidInputError("lookback s must be positive")
    ks = np.arange(sol.n_t)
    if sol.direction == BACKWARD:
        U = sol.values[(ks - m) % sol.n_t]
        rhs = prop.propagate(U.copy(), ks - m, m)
    else:
        U = sol.values[(ks + m) % sol.n_t]
        rhs = prop.propagate(U.copy(), ks + m, m, forward=True)
    rhs = rhs + m * prop.dt * sol.alpha
    diff = sol.values - rhs
    return float(np.max(np.abs(diff))), float(max(np.max(diff), 0.0))


def viscosity_check(sol: WeakKamSolution, conv_tol: float = 1e-6, s: float = 1.0) -> ViscosityReport:
    if not sol.converged(conv_tol):
        raise InvalidStateError(f"solution not converged: last running-min change {sol.tail:.3g}")
    prop = sol.propagator()
    r = hj_residual(sol, prop)
    cal, _ = calibration_check(sol, s, prop)
    return ViscosityReport(float(max(np.max(r), 0.0)), cal, cal, sol.grid.n_per_dim, sol.n_t, r)


def idempotence_defect(sol: WeakKamSolution) -> float:
    """Sup change after one more corrected period."""
    return calibration_check(sol, 1.0)[0]


def lipschitz_in_lambda_check(u0, omega, model: LagrangianModel, grid: SpaceGrid, n_t: int, alpha: float,
                              lam_pairs, t: float = 0.0, v_cap: float = DEFAULT_V_CAP) -> float:
    """max |T_l1 u0 - T_l2 u0| / (|l1 - l2| (f + |alpha|)) over the pairs; equal pairs are skipped."""
    prop = Propagator(model, omega, grid, n_t, v_cap)
    f = bound_constants(omega, model, grid, n_t).f
    scale = f + abs(alpha)
    worst = 0.0
    cache = {}

    def T(lam):
        key = time_index(lam, n_t)
        if key not in cache:
            cache[key] = lax_oleinik(u0, lam, t, omega, model, grid, n_t, alpha, propagator=prop)
        return cache[key]

    for l1, l2 in lam_pairs:
        if time_index(l1, n_t) == time_index(l2, n_t):
            continue
        diff = float(np.max(np.abs(T(l1) - T(l2))))
        if diff == 0.0:
            continue
        worst = max(worst, np.inf if scale == 0 else diff / (abs(l1 - l2) * scale))
    return worst


def equivariance_check(sys: SkewProductSystem, omega, s: float, model: LagrangianModel, grid: SpaceGrid,
                       n_t: int, alpha: float, direction: str = BACKWARD, **solver):
    """(sup |u at theta(s) omega at (x, t) - u at omega at (x, t + s)|, periodicity defect)."""
    m = time_index(s, n_t)
    a = weak_kam_solve(omega, model, grid, n_t, alpha, direction=direction, **solver)
    if m == 0:
        return 0.0, 0.0
    b = weak_kam_solve(theta(sys, s, omega), model, grid, n_t, alpha, direction=direction, **solver)
    shifted = a.values[(np.arange(n_t) + m) % n_t]
    # periodicity holds by construction: slices live on one period
    return float(np.max(np.abs(b.values - shifted))), 0.0
