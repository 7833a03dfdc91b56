"""B-sets, Euler-Lagrange launches of global minimizers and their verification."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .action import Curve, action_kernel, discrete_action, make_curve, time_index
from .errors import InvalidInputError, InvalidStateError, NondifferentiablePoint
from .lagrangian import HamiltonianView, LagrangianModel, dH_dp, el_acceleration, eval_L, partials
from .omega import SkewProductSystem, theta
from .torus import SpaceGrid, centered_array
from .weak_kam import BACKWARD, FORWARD, WeakKamSolution, weak_kam_solve


@dataclass
class BSet:
    t0: float
    nodes: list
    minimum: float
    tol: float


def _same_problem(u: WeakKamSolution, u_plus: WeakKamSolution):
    if u.grid != u_plus.grid or u.n_t != u_plus.n_t:
        raise InvalidInputError("backward and forward solutions live on different grids")
    if u.alpha != u_plus.alpha:
        raise InvalidInputError("backward and forward solutions use different alpha")
    if u.direction != BACKWARD or u_plus.direction != FORWARD:
        raise InvalidInputError("expected a backward and a forward solution, in that order")


def b_set(u: WeakKamSolution, u_plus: WeakKamSolution, t0: float, tol: float) -> BSet:
    """Nodes where u(., t0) + u_plus(., t0) is within tol of its minimum."""
    _same_problem(u, u_plus)
    total = (u.slice(t0) + u_plus.slice(t0)).reshape(-1)
    lo = float(total.min())
    nodes = [int(i) for i in np.nonzero(total <= lo + tol)[0]]
    return BSet(float(t0), nodes, lo, float(tol))


def slice_gradients(values: np.ndarray, grid: SpaceGrid, index: int):
    """(centered, backward, forward) difference gradients at one node, each a d-vector."""
    u = values.reshape(grid.shape)
    multi = np.array(grid.index_to_multi(index))
    here = u[tuple(multi)]
    cen, back, fwd = (np.zeros(grid.d) for _ in range(3))
    for ax in range(grid.d):
        e = np.zeros(grid.d, dtype=int)
        e[ax] = 1
        up = u[tuple((multi + e) % grid.n_per_dim)]
        dn = u[tuple((multi - e) % grid.n_per_dim)]
        cen[ax] = (up - dn) / (2 * grid.dx)
        back[ax] = (here - dn) / grid.dx
        fwd[ax] = (up - here) / grid.dx
    return cen, back, fwd


def gradient_sum(u: WeakKamSolution, u_plus: WeakKamSolution, t0: float, nodes) -> np.ndarray:
    """|D u + D u_plus| (centered differences) at the given nodes."""
    out = []
    for i in nodes:
        a = slice_gradients(u.slice(t0), u.grid, i)[0]
        b = slice_gradients(u_plus.slice(t0), u.grid, i)[0]
        out.append(float(np.max(np.abs(a + b))))
    return np.array(out)


def integrate_el(model: LagrangianModel, omega, x0, v0, t0: float, duration: float, dt: float):
    """Classical RK4 on (x, v); negative duration integrates backward.  Returns (times, x, v)."""
    n = int(round(abs(duration) / dt))
    if n == 0:
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return np.array([t0]), x0[None].copy(), np.atleast_1d(np.asarray(v0, dtype=float))[None].copy()
    h = np.sign(duration) * abs(duration) / n
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    v = np.atleast_1d(np.asarray(v0, dtype=float)).copy()
    xs, vs = [x.copy()], [v.copy()]
    acc = lambda xx, vv, tt: el_acceleration(model, xx, vv, tt, omega)  # noqa: E731
    for i in range(n):
        t = t0 + i * h
        k1x, k1v = v, acc(x, v, t)
        k2x, k2v = v + 0.5 * h * k1v, acc(x + 0.5 * h * k1x, v + 0.5 * h * k1v, t + 0.5 * h)
        k3x, k3v = v + 0.5 * h * k2v, acc(x + 0.5 * h * k2x, v + 0.5 * h * k2v, t + 0.5 * h)
        k4x, k4v = v + h * k3v, acc(x + h * k3x, v + h * k3v, t + h)
        x = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise InvalidStateError("Euler-Lagrange integration produced non-finite values")
        xs.append(x.copy())
        vs.append(v.copy())
    return t0 + h * np.arange(n + 1), np.array(xs), np.array(vs)


def energy(model: LagrangianModel, x, v, t, omega=None):
    """v . dL/dv - L."""
    _, lv = partials(model, x, v, t, omega)
    return np.sum(np.atleast_2d(v) * np.atleast_2d(lv), axis=-1) - np.atleast_1d(eval_L(model, x, v, t, omega))


@dataclass
class MinimizerOrbit:
    curve: Curve
    x0: np.ndarray
    v0: np.ndarray
    t0: float
    states: np.ndarray = field(repr=False)
    defects: dict = field(default_factory=dict)

    def index_of(self, t: float) -> int:
        i = int(round((t - self.curve.times[0]) / self.curve.dt))
        if i < 0 or i >= len(self.curve.times) or abs(self.curve.times[i] - t) > 1e-9:
            raise InvalidInputError(f"time {t} is not a sample of the orbit")
        return i

    def window(self, s: float, t: float):
        i, j = self.index_of(s), self.index_of(t)
        return self.curve.times[i:j + 1], self.curve.lifted[i:j + 1]

    def window_action(self, s: float, t: float, model, omega) -> float:
        times, lifted = self.window(s, t)
        return discrete_action(lifted, times, model, omega)


def launch_minimizer(x0_index: int, t0: float, u: WeakKamSolution, u_plus: Optional[WeakKamSolution],
                     omega, model: LagrangianModel, horizon: float = 8.0, dt_int: Optional[float] = None,
                     bset: Optional[BSet] = None, gate: float = 10.0) -> MinimizerOrbit:
    """Launch v0 = dH/dp(x0, D u(x0, t0), t0) and integrate the EL flow over [t0 - T, t0 + T]."""
    grid = u.grid
    if bset is not None and int(x0_index) not in bset.nodes:
        raise InvalidInputError(f"node {x0_index} is not in the B-set at t0 = {bset.t0}")
    cen, back, fwd = slice_gradients(u.slice(t0), grid, x0_index)
    gap = max(np.max(np.abs(cen - back)), np.max(np.abs(cen - fwd)))
    if gap > gate * grid.dx:
        raise NondifferentiablePoint(f"one-sided gradients of u at node {x0_index} differ by {gap:.3g}")
    x0 = grid.point(x0_index).array()
    x0 = centered_array(x0)
    v0 = np.atleast_1d(dH_dp(HamiltonianView(model), x0, cen, t0, omega)).reshape(-1)
    dt_int = dt_int or 1.0 / (4 * u.n_t)
    tb, xb, vb = integrate_el(model, omega, x0, v0, t0, -horizon, dt_int)
    tf, xf, vf = integrate_el(model, omega, x0, v0, t0, horizon, dt_int)
    times = np.concatenate([tb[::-1], tf[1:]])
    xs = np.vstack([xb[::-1], xf[1:]])
    vs = np.vstack([vb[::-1], vf[1:]])
    # pin the sample times to exact multiples of dt_int relative to t0
    times = t0 + dt_int * np.arange(-(len(tb) - 1), len(tf))
    curve = make_curve(xs, times, model, omega)
    return MinimizerOrbit(curve, x0, v0, float(t0), np.hstack([xs, vs]))


def unit_windows(t0: float, horizon: float, side: str = "both", length: float = 1.0) -> list:
    n = int(round(horizon / length))
    back = [(t0 - (k + 1) * length, t0 - k * length) for k in range(n)][::-1]
    fwd = [(t0 + k * length, t0 + (k + 1) * length) for k in range(n)]
    return {"backward": back, "forward": fwd, "both": back + fwd}[side]


def verify_global_minimizer(orbit: MinimizerOrbit, omega, model: LagrangianModel, windows, grid: SpaceGrid,
                            n_t: int, v_cap: float = 4.0):
    """max over windows of (orbit action on [s, t]) - K(s, node(gamma(s)); t, node(gamma(t)))."""
    defects = []
    for s, t in windows:
        time_index(s, n_t), time_index(t, n_t)
        times, lifted = orbit.window(s, t)
        act = discrete_action(lifted, times, model, omega)
        y = grid.nearest_index(lifted[0])
        x = grid.nearest_index(lifted[-1])
        ker = action_kernel(s, t, omega, model, grid, n_t, v_cap, sources=[y], keep_backpointers=False)
        defects.append(act - ker.value(y, x))
    return float(max(defects)), defects


def _u_at(sol: WeakKamSolution, point, t: float) -> float:
    k = time_index(t, sol.n_t) % sol.n_t
    return float(sol.values[k].reshape(-1)[sol.grid.nearest_index(point)])


def calibration_of_orbit(orbit: MinimizerOrbit, u: WeakKamSolution, u_plus: Optional[WeakKamSolution], omega,
                         alpha: float, windows, model: Optional[LagrangianModel] = None):
    """(backward defect over windows with t <= t0, forward defect over windows with s >= t0)."""
    model = model or u.model
    back = fwd = 0.0
    for s, t in windows:
        times, lifted = orbit.window(s, t)
        act = discrete_action(lifted, times, model, omega)
        if t <= orbit.t0 + 1e-12:
            gap = _u_at(u, lifted[-1], t) - _u_at(u, lifted[0], s) - act - (t - s) * alpha
            back = max(back, abs(gap))
        if s >= orbit.t0 - 1e-12 and u_plus is not None:
            gap = _u_at(u_plus, lifted[0], s) - _u_at(u_plus, lifted[-1], t) - act - (t - s) * alpha
            fwd = max(fwd, abs(gap))
    return back, fwd


def perturb_orbit(orbit: MinimizerOrbit, s: float, t: float, amplitude: float, model, omega,
                  direction=None) -> MinimizerOrbit:
    """Add a sine bump of the given amplitude on [s, t] (endpoints unchanged)."""
    i, j = orbit.index_of(s), orbit.index_of(t)
    lifted = orbit.curve.lifted.copy()
    phase = (orbit.curve.times[i:j + 1] - s) / (t - s)
    e = np.zeros(lifted.shape[1])
    e[0] = 1.0
    e = e if direction is None else np.asarray(direction, dtype=float)
    lifted[i:j + 1] += amplitude * np.sin(np.pi * phase)[:, None] * e
    curve = make_curve(lifted, orbit.curve.times, model, omega)
    return MinimizerOrbit(curve, orbit.x0, orbit.v0, orbit.t0, orbit.states,
                          {"perturbed_window": (s, t), "amplitude": amplitude})


def first_smooth_node(u: WeakKamSolution, bset: BSet, gate: float = 10.0) -> int:
    for i in bset.nodes:
        cen, back, fwd = slice_gradients(u.slice(bset.t0), u.grid, i)
        if max(np.max(np.abs(cen - back)), np.max(np.abs(cen - fwd))) <= gate * u.grid.dx:
            return i
    raise NondifferentiablePoint("no B-set node passes the differentiability gate")


@dataclass
class ThetaFlowResult:
    defect: float
    bset_match: bool
    x0_index: int


def theta_flow_check(sys: SkewProductSystem, omega, s: float, model: LagrangianModel, grid: SpaceGrid,
                     n_t: int, alpha: float, t0: float = 0.0, horizon: float = 2.0, tol: float = 0.02,
                     x0_index: Optional[int] = None, solver: Optional[dict] = None,
                     dt_int: Optional[float] = None) -> ThetaFlowResult:
    """Compare the minimizer launched at theta(s) omega from (x0, t0) with the one at omega from (x0, t0 + s)."""
    solver = dict(solver or {})
    m = time_index(s, n_t)
    u = weak_kam_solve(omega, model, grid, n_t, alpha, **solver)
    up = weak_kam_solve(omega, model, grid, n_t, alpha, direction=FORWARD, **solver)
    if m == 0:
        u2, up2 = u, up
    else:
        om2 = theta(sys, s, omega)
        u2 = weak_kam_solve(om2, model, grid, n_t, alpha, **solver)
        up2 = weak_kam_solve(om2, model, grid, n_t, alpha, direction=FORWARD, **solver)
    b_ref = b_set(u, up, t0 + s, tol)
    b_new = b_set(u2, up2, t0, tol)
    if b_ref.nodes != b_new.nodes:
        raise InvalidStateError("B-set at theta(s) omega differs from the time-shifted B-set at omega")
    x0 = first_smooth_node(u2, b_new) if x0_index is None else int(x0_index)
    a = launch_minimizer(x0, t0 + s, u, up, omega, model, horizon, dt_int)
    om2 = omega if m == 0 else theta(sys, s, omega)
    b = launch_minimizer(x0, t0, u2, up2, om2, model, horizon, dt_int)
    dx = np.abs(centered_array(a.states[:, :grid.d] - b.states[:, :grid.d]))
    dv = np.abs(a.states[:, grid.d:] - b.states[:, grid.d:])
    defect = float(np.max(np.linalg.norm(dx, axis=1) + np.linalg.norm(dv, axis=1)))
    return ThetaFlowResult(defect, True, x0)
