"""Discrete Lagrangian action on the space-time grid.

The backbone is a min-plus dynamic programme over grid nodes: one time step of
length dt moves a node y to a node x with |lift(x - y)| <= v_cap * dt and costs
dt * L(y, lift(x - y) / dt, t_k) (left-endpoint quadrature).  Composing steps
gives the two-point action kernel; backtracking its argmins gives minimizing
curves, which can then be polished off-grid by descent on the discrete action.
"""
from __future__ import annotations

import csv
import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, InternalError, InvalidInputError
from .lagrangian import LagrangianModel, partials
from .torus import SpaceGrid, TorusPoint, centered_array, displacement, winding_lifts, wrap_array

DEFAULT_V_CAP = 4.0


class VelocityCapWarning(UserWarning):
    """An argmin sits on the velocity cap; enlarge v_cap."""


def time_index(t: float, n_t: int) -> int:
    k = int(round(t * n_t))
    if abs(t * n_t - k) > 1e-9:
        raise InvalidInputError(f"time {t} is not a multiple of dt = 1/{n_t}")
    return k


def _shift_fill(a: np.ndarray, off, axes, fill=np.inf) -> np.ndarray:
    """Like np.roll but without wrap-around: vacated entries get ``fill``."""
    out = np.full_like(a, fill)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    for o, ax in zip(off, axes):
        n = a.shape[ax]
        if o >= 0:
            src[ax], dst[ax] = slice(0, n - o), slice(o, n)
        else:
            src[ax], dst[ax] = slice(-o, n), slice(0, n + o)
    out[tuple(dst)] = a[tuple(src)]
    return out


class Propagator:
    """One-step min-plus operators for a fixed (model, omega, grid, dt, v_cap).

    ``tile`` > 0 switches to a lifted, non-periodic domain made of ``tile``
    copies of the torus per dimension; paths cannot leave it.
    """

    def __init__(self, model: LagrangianModel, omega, grid: SpaceGrid, n_t: int,
                 v_cap: float = DEFAULT_V_CAP, tile: int = 0, threads: int = 1):
        if model.d != grid.d:
            raise InvalidInputError(f"model dimension {model.d} != grid dimension {grid.d}")
        if n_t < 1:
            raise InvalidInputError("n_t must be positive")
        self.model, self.omega, self.grid = model, omega, grid
        self.n_t = int(n_t)
        self.dt = 1.0 / self.n_t
        self.v_cap = float(v_cap)
        self.tile = int(tile)
        self.threads = max(1, int(threads))
        reach = self.v_cap * self.dt / grid.dx
        if reach < 1.0 - 1e-12:
            raise ConfigurationError(
                f"v_cap * dt = {self.v_cap * self.dt:.4g} is below one grid cell ({grid.dx:.4g}); "
                "the only candidate is standing still")
        if self.v_cap * self.dt >= 0.5:
            raise ConfigurationError("v_cap * dt must stay below half a period")
        r = int(np.floor(reach + 1e-9))
        offs = [o for o in itertools.product(range(-r, r + 1), repeat=grid.d)
                if np.linalg.norm(o) <= reach + 1e-9]
        self.offsets = np.array(offs, dtype=int)
        self.max_offset_norm = float(np.max(np.linalg.norm(self.offsets, axis=1)))
        self.velocities = self.offsets * grid.dx / self.dt
        self.points = grid.centered_points()
        self.domain_shape = tuple(n * self.tile for n in grid.shape) if self.tile else grid.shape
        self._flat = np.arange(int(np.prod(self.domain_shape))).reshape(self.domain_shape)
        self._axes_cache = {}
        self._cost = {}
        self._cost_src = {}
        self._all_src = None
        self._all_fwd = None

    # -- cost tables ---------------------------------------------------------------
    @property
    def n_off(self) -> int:
        return len(self.offsets)

    def time_of(self, k: int) -> float:
        return (int(k) % self.n_t) * self.dt

    def cost(self, k: int) -> np.ndarray:
        """dt * L(x, v_j, t_k) at every node x for every candidate velocity v_j."""
        k = int(k) % self.n_t
        if k not in self._cost:
            d = self.grid.d
            vel = self.velocities.reshape((self.n_off,) + (1,) * d + (d,))
            table = self.dt * self.model.lagrangian(self.points[None], vel, self.time_of(k), self.omega)
            if self.tile:
                table = np.tile(table, (1,) + (self.tile,) * d)
            self._cost[k] = np.ascontiguousarray(table)
        return self._cost[k]

    def cost_at_source(self, k: int) -> np.ndarray:
        """Entry [j][x]: cost of the step arriving at x with offset j, paid at x - offset_j."""
        k = int(k) % self.n_t
        if k not in self._cost_src:
            table = self.cost(k)
            axes = tuple(range(self.grid.d))
            self._cost_src[k] = np.stack([np.roll(table[j], tuple(self.offsets[j]), axes)
                                          for j in range(self.n_off)])
        return self._cost_src[k]

    def _all_tables(self, forward: bool) -> np.ndarray:
        if forward:
            if self._all_fwd is None:
                self._all_fwd = np.stack([self.cost(k) for k in range(self.n_t)])
            return self._all_fwd
        if self._all_src is None:
            self._all_src = np.stack([self.cost_at_source(k) for k in range(self.n_t)])
        return self._all_src

    def source_index(self, j: int) -> np.ndarray:
        key = ("src", j)
        if key not in self._axes_cache:
            self._axes_cache[key] = self._shift_index(self._flat, self.offsets[j])
        return self._axes_cache[key]

    def dest_index(self, j: int) -> np.ndarray:
        key = ("dst", j)
        if key not in self._axes_cache:
            self._axes_cache[key] = self._shift_index(self._flat, -self.offsets[j])
        return self._axes_cache[key]

    def _shift_index(self, idx, off):
        axes = tuple(range(self.grid.d))
        if self.tile:
            return _shift_fill(idx, tuple(off), axes, fill=np.iinfo(idx.dtype).max)
        return np.roll(idx, tuple(off), axes)

    def _shift(self, U, off):
        axes = tuple(range(U.ndim - self.grid.d, U.ndim))
        if self.tile:
            return _shift_fill(U, tuple(off), axes)
        return np.roll(U, tuple(off), axes)

    # -- single steps --------------------------------------------------------------
    def _step_rows(self, U, tables, forward, track):
        best = None
        best_idx = None
        for j in range(self.n_off):
            off = -self.offsets[j] if forward else self.offsets[j]
            cand = self._shift(U, off)
            cand += tables[j] if tables.ndim == self.grid.d + 1 else tables[:, j]
            if best is None:
                best = cand
                if track:
                    best_idx = np.broadcast_to(
                        self.dest_index(j) if forward else self.source_index(j), U.shape).copy()
                continue
            if track:
                idx = self.dest_index(j) if forward else self.source_index(j)
                better = (cand < best) | ((cand == best) & (idx < best_idx))
                best = np.where(better, cand, best)
                best_idx = np.where(better, idx, best_idx)
            else:
                np.minimum(best, cand, out=best)
        return best, best_idx

    def _tables(self, k, forward):
        if np.ndim(k) == 0:
            return self.cost(k) if forward else self.cost_at_source(k)
        return self._all_tables(forward)[np.asarray(k) % self.n_t]

    def step(self, U: np.ndarray, k, forward: bool = False, track: bool = False):
        """One step.  Backward operator (forward in time): input at t_k, output at t_{k+1}.

        Forward operator (cost-to-go): input at t_{k+1}, output at t_k; ``k`` is the
        output time index.  ``U`` has batch axes followed by the spatial axes.
        """
        tables = self._tables(k, forward)
        batched = U.ndim > self.grid.d
        if self.threads > 1 and batched and U.shape[0] >= self.threads:
            chunks = np.array_split(np.arange(U.shape[0]), self.threads)

            def work(rows):
                tab = tables if tables.ndim == self.grid.d + 1 else tables[rows]
                return self._step_rows(U[rows], tab, forward, track)

            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(work, chunks))
            out = np.concatenate([p[0] for p in parts])
            idx = np.concatenate([p[1] for p in parts]) if track else None
        else:
            out, idx = self._step_rows(U, tables, forward, track)
        if track:
            self._check_cap(idx, forward)
        return out, idx

    def _check_cap(self, idx, forward):
        if self.tile or self.max_offset_norm == 0:
            return
        edge = [j for j in range(self.n_off)
                if np.linalg.norm(self.offsets[j]) >= self.max_offset_norm - 1e-9]
        for j in edge:
            ref = self.dest_index(j) if forward else self.source_index(j)
            if np.any(idx == ref) and not np.all(self.offsets[j] == 0):
                warnings.warn("minimizing step sits on the velocity cap; consider a larger v_cap",
                              VelocityCapWarning, stacklevel=3)
                return

    def propagate(self, U, k0, n_steps: int, forward: bool = False, callback=None, track=False):
        """Apply ``n_steps`` steps.  Backward: start time index k0, moving forward in time.

        Forward (cost-to-go): start time index k0, moving backward in time.
        ``k0`` may be an integer array with one start index per batch row.
        """
        trail = [] if track else None
        k0 = np.asarray(k0) if np.ndim(k0) else int(k0)
        for j in range(n_steps):
            k = (k0 - j - 1) if forward else (k0 + j)
            U, idx = self.step(U, k, forward=forward, track=track)
            if track:
                trail.append(idx)
            if callback is not None:
                callback(j + 1, U)
        return (U, trail) if track else U


def lax_step(u, t: float, omega, model: LagrangianModel, grid: SpaceGrid, n_t: int,
             v_cap: float = DEFAULT_V_CAP, direction: str = "backward", propagator=None):
    """One grid step of the Lax-Oleinik operator.

    ``backward`` maps a slice at time t to t + dt, ``forward`` maps it to t - dt.
    Returns (values, argmin node indices).
    """
    prop = propagator or Propagator(model, omega, grid, n_t, v_cap)
    k = time_index(t, n_t)
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    if direction == "backward":
        return prop.step(u, k, forward=False, track=True)
    if direction == "forward":
        return prop.step(u, k - 1, forward=True, track=True)
    raise InvalidInputError(f"direction must be 'backward' or 'forward', got {direction!r}")


# -- kernels and curves ------------------------------------------------------------------

@dataclass
class Curve:
    times: np.ndarray
    points: np.ndarray
    lifted: np.ndarray
    velocities: np.ndarray
    action: float
    p_start: np.ndarray
    p_end: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def to_csv(self, path):
        write_curve_csv(path, self.times, self.lifted, _node_velocities(self.velocities))


def _node_velocities(seg_v):
    return np.vstack([seg_v, seg_v[-1:]])


def write_curve_csv(path, times, positions, velocities):
    d = positions.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(d)] + [f"v{i + 1}" for i in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, x, v in zip(times, positions, velocities):
            w.writerow([repr(float(t))] + [repr(float(c)) for c in x] + [repr(float(c)) for c in v])


def discrete_action(lifted: np.ndarray, times: np.ndarray, model: LagrangianModel, omega=None) -> float:
    """Left-endpoint quadrature of the action of a piecewise-linear lifted path."""
    dts = np.diff(times)
    vel = np.diff(lifted, axis=0) / dts[:, None]
    return float(np.sum(dts * model.lagrangian(lifted[:-1], vel, times[:-1], omega)))


def make_curve(lifted, times, model, omega=None, action=None, info=None) -> Curve:
    lifted = np.asarray(lifted, dtype=float)
    times = np.asarray(times, dtype=float)
    vel = np.diff(lifted, axis=0) / np.diff(times)[:, None]
    if action is None:
        action = discrete_action(lifted, times, model, omega)
    _, p0 = partials(model, lifted[0], vel[0], times[0], omega)
    _, p1 = partials(model, lifted[-1], vel[-1], times[-1], omega)
    return Curve(times, wrap_array(lifted.copy()), lifted, vel, float(action), p0, p1, dict(info or {}))


@dataclass
class ActionKernel:
    """Minimal discrete action A(s, y; t, x) from every listed source y to every node x."""

    s: float
    t: float
    values: np.ndarray
    sources: np.ndarray
    backpointers: Optional[list]
    propagator: Propagator = field(repr=False)

    @property
    def grid(self) -> SpaceGrid:
        return self.propagator.grid

    def _row(self, y: int) -> int:
        rows = np.nonzero(self.sources == int(y))[0]
        if rows.size == 0:
            raise InvalidInputError(f"node {y} is not a source of this kernel")
        return int(rows[0])

    def value(self, y: int, x: int) -> float:
        return float(self.values[self._row(y), int(x)])

    def from_source(self, y: int) -> np.ndarray:
        """x -> A(s, y; t, x) reshaped to the grid."""
        return self.values[self._row(y)].reshape(self.grid.shape)

    def to_target(self, x: int) -> np.ndarray:
        """y -> A(s, y; t, x); needs all nodes as sources."""
        if self.sources.size != self.grid.n_nodes:
            raise InvalidInputError("to_target needs a kernel over all sources")
        return self.values[np.argsort(self.sources), int(x)].reshape(self.grid.shape)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y_index", "x_index", "action"])
            for r, y in enumerate(self.sources):
                for x in range(self.values.shape[1]):
                    w.writerow([int(y), x, repr(float(self.values[r, x]))])


def action_kernel(s: float, t: float, omega, model: LagrangianModel, grid: SpaceGrid, n_t: int,
                  v_cap: float = DEFAULT_V_CAP, sources=None, keep_backpointers: bool = True,
                  propagator: Optional[Propagator] = None, threads: int = 1) -> ActionKernel:
    """Compose grid steps over [s, t] from each source node (source-first argument order)."""
    prop = propagator or Propagator(model, omega, grid, n_t, v_cap, threads=threads)
    k_s, k_t = time_index(s, n_t), time_index(t, n_t)
    if k_t <= k_s:
        raise InvalidInputError("need t > s")
    src = np.arange(grid.n_nodes) if sources is None else np.atleast_1d(np.asarray(sources, dtype=int))
    U = np.full((src.size, grid.n_nodes), np.inf)
    U[np.arange(src.size), src] = 0.0
    U = U.reshape((src.size,) + grid.shape)
    out = prop.propagate(U, k_s, k_t - k_s, track=keep_backpointers)
    if keep_backpointers:
        U, trail = out
        trail = [idx.reshape(src.size, -1).astype(np.int32) for idx in trail]
    else:
        U, trail = out, None
    return ActionKernel(k_s / n_t, k_t / n_t, U.reshape(src.size, -1), src, trail, prop)


def action_to_target(s: float, t: float, x: int, omega, model: LagrangianModel, grid: SpaceGrid, n_t: int,
                     v_cap: float = DEFAULT_V_CAP, propagator: Optional[Propagator] = None) -> np.ndarray:
    """y -> A(s, y; t, x) on the grid, by one cost-to-go sweep from the target node."""
    prop = propagator or Propagator(model, omega, grid, n_t, v_cap)
    k_s, k_t = time_index(s, n_t), time_index(t, n_t)
    if k_t <= k_s:
        raise InvalidInputError("need t > s")
    U = np.full(grid.n_nodes, np.inf)
    U[int(x)] = 0.0
    return prop.propagate(U.reshape(grid.shape), k_t, k_t - k_s, forward=True)


def extract_minimizer(kernel: ActionKernel, y: int, x: int) -> Curve:
    """Backtrack the stored argmins from node x to source y into a lifted curve."""
    if kernel.backpointers is None:
        raise InvalidInputError("kernel was computed without backpointers")
    prop = kernel.propagator
    grid = prop.grid
    row = kernel._row(y)
    nodes = [int(x)]
    for idx in reversed(kernel.backpointers):
        nodes.append(int(idx[row, nodes[-1]]))
    nodes.reverse()
    if nodes[0] != int(y):
        raise InternalError(f"backpointers do not lead back to source {y} (got {nodes[0]})")
    k_s = time_index(kernel.s, prop.n_t)
    pts = np.array([grid.point(n).array() for n in nodes])
    steps = np.array([displacement(pts[i], pts[i + 1]) for i in range(len(pts) - 1)])
    lifted = np.vstack([pts[:1], pts[:1] + np.cumsum(steps, axis=0)])
    # accumulate the action from the very table entries the kernel used
    action = 0.0
    offsets = prop.offsets
    for i, stp in enumerate(steps):
        off = np.rint(stp / grid.dx).astype(int)
        j = int(np.nonzero(np.all(offsets == off, axis=1))[0][0])
        action = action + prop.cost(k_s + i)[j].reshape(-1)[nodes[i]]
    if not np.isfinite(action) or abs(action - kernel.value(y, x)) > 1e-12 * max(1.0, abs(action)):
        raise InternalError("backtracked action does not match the kernel")
    times = kernel.s + np.arange(len(nodes)) * prop.dt
    curve = make_curve(lifted, times, prop.model, prop.omega, action=action)
    curve.info["nodes"] = nodes
    return curve


def straight_curve(y, lift, s: float, t: float, n_steps: int, model, omega=None) -> Curve:
    y = np.atleast_1d(np.asarray(y.array() if isinstance(y, TorusPoint) else y, dtype=float))
    frac = np.linspace(0.0, 1.0, n_steps + 1)[:, None]
    lifted = y[None, :] + frac * np.asarray(lift, dtype=float)[None, :]
    times = s + (t - s) * frac[:, 0]
    return make_curve(lifted, times, model, omega)


# -- off-grid refinement -----------------------------------------------------------------

def _L_xx_diag(model: LagrangianModel, x, tau):
    """Diagonal of the position Hessian for closed-form models (used for preconditioning)."""
    out = np.zeros(x.shape)
    if not model.closed_form or not model.V_coeffs:
        return out
    xc = centered_array(x)
    for term in model.V_coeffs:
        kx = np.array(term[: model.d], dtype=float)
        kt, c = term[model.d], term[model.d + 1]
        arg = 2 * np.pi * (xc @ kx + kt * tau)
        out += (c * (2 * np.pi) ** 2 * np.cos(arg))[:, None] * kx ** 2
    return out


def action_gradient(lifted, times, model, omega=None):
    """Gradient of the discrete action w.r.t. the interior nodes, shape (n - 1, d)."""
    dts = np.diff(times)
    vel = np.diff(lifted, axis=0) / dts[:, None]
    lx, lv = partials(model, lifted[:-1], vel, times[:-1], omega)
    return dts[1:, None] * lx[1:] + lv[:-1] - lv[1:]


def refine_minimizer(curve: Curve, omega, model: LagrangianModel, max_iters: int = 200,
                     tol: float = 1e-9) -> Curve:
    """Preconditioned gradient descent with Armijo backtracking on the interior nodes.

    Endpoints stay fixed.  Stops when the discrete Euler-Lagrange residual
    (action gradient divided by dt) is below ``tol`` in sup-norm.
    """
    times = curve.times
    X = curve.lifted.copy()
    n = len(times) - 1
    dt = float(np.mean(np.diff(times)))
    if n < 2:
        return make_curve(X, times, model, omega, info={"iterations": 0, "residual": 0.0, "converged": True})
    S = discrete_action(X, times, model, omega)
    history = [S]
    flag = None
    resid = np.inf
    it = 0
    mass = model.mass if model.closed_form else 1.0
    for it in range(max_iters + 1):
        g = action_gradient(X, times, model, omega)
        resid = float(np.max(np.abs(g))) / dt
        if resid <= tol or it == max_iters:
            break
        tau = model.tau(times[1:-1], omega) if model.closed_form else times[1:-1]
        diag_pot = np.maximum(dt * _L_xx_diag(model, X[1:-1], tau), 0.0)
        direction = np.empty_like(g)
        for k in range(model.d):
            ab = np.zeros((3, n - 1))
            ab[0, 1:] = -mass / dt
            ab[1, :] = 2 * mass / dt + diag_pot[:, k]
            ab[2, :-1] = -mass / dt
            direction[:, k] = -solve_banded((1, 1), ab, g[:, k])
        slope = float(np.sum(g * direction))
        step = 1.0
        for _ in range(60):
            trial = X.copy()
            trial[1:-1] += step * direction
            S_new = discrete_action(trial, times, model, omega)
            if S_new <= S + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            flag = "line-search failure"
            break
        if S_new > S:
            raise InternalError("descent step increased the action")
        X, S = trial, S_new
        history.append(S)
    info = {"iterations": it, "residual": resid, "converged": resid <= tol,
            "action_history": history, "warning": flag}
    return make_curve(X, times, model, omega, action=S, info=info)


# -- semiconcavity and superdifferentials ------------------------------------------------

def second_differences(u: np.ndarray, grid: SpaceGrid, h: float, axis: int = 0) -> np.ndarray:
    """(u(x + h e) + u(x - h e) - 2 u(x)) / h^2 on the periodic grid."""
    m = h / grid.dx
    if abs(m - round(m)) > 1e-9 or round(m) < 1:
        raise InvalidInputError(f"probe step {h} is not a positive multiple of dx = {grid.dx}")
    m = int(round(m))
    u = np.asarray(u, dtype=float).reshape(grid.shape)
    return (np.roll(u, -m, axis) + np.roll(u, m, axis) - 2 * u) / h ** 2


def semiconcavity_constant(u: np.ndarray, grid: SpaceGrid, h: float, mask=None) -> float:
    """Largest second difference with probe step h over all nodes (and axes)."""
    best = -np.inf
    for ax in range(grid.d):
        sd = second_differences(u, grid, h, ax)
        if mask is not None:
            sd = sd[np.asarray(mask).reshape(grid.shape)]
        best = max(best, float(np.max(sd)))
    return best


def superdifferential_momenta(s: float, y, t: float, x, omega, model: LagrangianModel,
                              restarts: int = 1, n_steps: Optional[int] = None, w_max: int = 1,
                              seed: int = 0, extra_curves=(), action_tol: float = 1e-7,
                              dedupe_tol: float = 1e-4, return_curves: bool = False):
    """Endpoint momenta dL/dv(x, gamma'(t), t) of all minimizers found by refined restarts.

    Initial curves are straight lines in each winding class |w| <= w_max plus
    seeded perturbations of them; only curves whose refined action is within
    ``action_tol`` of the best are kept.
    """
    if restarts < 1:
        raise InvalidInputError("restarts must be >= 1")
    if n_steps is None:
        n_steps = max(16, int(round((t - s) * 64)))
    rng = np.random.default_rng(seed)
    y = TorusPoint(tuple(np.atleast_1d(y.array() if isinstance(y, TorusPoint) else y)))
    x = TorusPoint(tuple(np.atleast_1d(x.array() if isinstance(x, TorusPoint) else x)))
    inits = []
    for lift in winding_lifts(y, x, w_max):
        base = straight_curve(y, lift, s, t, n_steps, model, omega)
        inits.append(base)
        for _ in range(restarts - 1):
            bump = np.sin(np.pi * np.linspace(0, 1, n_steps + 1))[:, None] * rng.normal(scale=0.05, size=model.d)
            inits.append(make_curve(base.lifted + bump, base.times, model, omega))
    inits.extend(extra_curves)
    refined = [refine_minimizer(c, omega, model) for c in inits]
    best = min(c.action for c in refined)
    keep = [c for c in refined if c.action <= best + action_tol * max(1.0, abs(best))]
    momenta = []
    curves = []
    for c in sorted(keep, key=lambda c: tuple(c.p_end)):
        if all(np.max(np.abs(c.p_end - p)) > dedupe_tol for p in momenta):
            momenta.append(c.p_end.copy())
            curves.append(c)
    return (momenta, curves) if return_curves else momenta


def superdifferential_defect(slice_values: np.ndarray, grid: SpaceGrid, x_index: int, p, C: float,
                             h: float) -> float:
    """max over +-h e_i of A(x + h) - A(x) - p.(h) - C |h|^2; <= 0 means p passes the test."""
    u = np.asarray(slice_values, dtype=float).reshape(grid.shape)
    m = int(round(h / grid.dx))
    multi = np.array(grid.index_to_multi(x_index))
    base = u[tuple(multi)]
    worst = -np.inf
    p = np.atleast_1d(p)
    for ax in range(grid.d):
        for sgn in (1, -1):
            e = np.zeros(grid.d, dtype=int)
            e[ax] = sgn * m
            other = u[tuple((multi + e) % grid.n_per_dim)]
            worst = max(worst, float(other - base - p[ax] * sgn * h - C * h * h))
    return worst


@dataclass
class KinkRecord:
    x_index: int
    n_momenta: int
    momenta: list
    second_difference: float
    is_kink: bool


def kink_multiplicity_report(kernel: ActionKernel, y: int, x_indices, h: float, restarts: int = 1,
                             n_steps: Optional[int] = None, factor: float = 10.0):
    """Pair minimizer multiplicity with concave kinks of x -> A(s, y; t, x) (d = 1 slices).

    A node is a kink when its second difference is below -factor times the
    median second difference over the single-minimizer nodes.
    """
    grid = kernel.grid
    prop = kernel.propagator
    row = kernel.from_source(y)
    sd = second_differences(row, grid, h).reshape(-1)
    y_pt = grid.point(y)
    records = []
    for xi in x_indices:
        mom = superdifferential_momenta(kernel.s, y_pt, kernel.t, grid.point(xi), prop.omega, prop.model,
                                        restarts=restarts, n_steps=n_steps)
        records.append(KinkRecord(int(xi), len(mom), [m.tolist() for m in mom], float(sd[xi]), False))
    smooth = [r.second_difference for r in records if r.n_momenta == 1]
    median = float(np.median(smooth)) if smooth else 0.0
    for r in records:
        r.is_kink = r.second_difference < -factor * median
    return records, median
