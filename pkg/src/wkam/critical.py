"""Critical value estimates and the Peierls barrier with Aubry-set detection.

Sign convention: alpha := -inf over closed probability measures of the
integral of L, so that T_n(u) + n * alpha stays bounded.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .action import DEFAULT_V_CAP, Curve, Propagator, time_index
from .errors import DivergenceError, InvalidInputError
from .lagrangian import LagrangianModel
from .omega import SkewProductSystem, omega_from_seed, theta
from .torus import SpaceGrid

CLOSED_CURVES = "closed-curves"
SUBADDITIVE = "subadditive"


@dataclass
class CriticalValueEstimate:
    value: float
    method: str
    n: int
    trace: list
    discrepancy: Optional[float] = None
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "n": self.n, "trace": list(self.trace),
                "discrepancy": self.discrepancy, **{k: v for k, v in self.extras.items()}}


def alpha_closed_curves(omega, model: LagrangianModel, grid: SpaceGrid, n_t: int, n_max: int = 4,
                        w_max: int = 2, v_cap: float = DEFAULT_V_CAP, base_nodes=None,
                        threads: int = 1) -> CriticalValueEstimate:
    """max over periods n <= n_max, windings |w| <= w_max and base nodes y of -K_loop / n.

    Loops are found by a DP on a lifted strip of 2 * (w_max + 1) + 1 copies of the
    torus, so a path ending at y + w (in lifted coordinates) is a closed curve of
    winding w.
    """
    if n_max < 1:
        raise InvalidInputError("n_max must be >= 1")
    if w_max < 0:
        raise InvalidInputError("w_max must be >= 0")
    half = w_max + 1
    tile = 2 * half + 1
    prop = Propagator(model, omega, grid, n_t, v_cap, tile=tile, threads=threads)
    base = np.arange(grid.n_nodes) if base_nodes is None else np.atleast_1d(np.asarray(base_nodes, dtype=int))
    big = prop.domain_shape
    centre = np.array([grid.index_to_multi(b) for b in base]) + half * grid.n_per_dim
    U = np.full((base.size,) + big, np.inf)
    rows = np.arange(base.size)
    U[(rows,) + tuple(centre.T)] = 0.0
    windings = [np.array(w) for w in np.ndindex(*(2 * w_max + 1,) * grid.d)]
    windings = [w - w_max for w in windings]
    trace = []
    best_loop = None
    for n in range(1, n_max + 1):
        U = prop.propagate(U, 0, n_t)
        best = -np.inf
        for w in windings:
            idx = (rows,) + tuple((centre + w * grid.n_per_dim).T)
            vals = -U[idx] / n
            j = int(np.argmax(vals))
            if vals[j] > best:
                best = float(vals[j])
                cand = (n, tuple(int(c) for c in w), int(base[j]))
            if best_loop is None or vals[j] > best_loop[0]:
                best_loop = (float(vals[j]), n, tuple(int(c) for c in w), int(base[j]))
        trace.append(best)
    value = float(max(trace))
    return CriticalValueEstimate(value, CLOSED_CURVES, n_max, trace,
                                 extras={"argmax": {"n": best_loop[1], "w": list(best_loop[2]),
                                                    "node": best_loop[3]}, "w_max": w_max})


def one_period_iterates(omega, model, grid, n_t, n_iters, v_cap=DEFAULT_V_CAP, u0=None,
                        start_index: int = 0, threads: int = 1, propagator=None):
    """Yield (n, T_n u0) for n = 1..n_iters (uncorrected one-period Lax-Oleinik map)."""
    prop = propagator or Propagator(model, omega, grid, n_t, v_cap, threads=threads)
    U = np.zeros(grid.shape) if u0 is None else np.asarray(u0, dtype=float).reshape(grid.shape)
    for n in range(1, n_iters + 1):
        U = prop.propagate(U, start_index, n_t)
        yield n, U


def alpha_subadditive(omega, model: LagrangianModel, grid: SpaceGrid, n_t: int, n_iters: int = 16,
                      v_cap: float = DEFAULT_V_CAP, threads: int = 1) -> CriticalValueEstimate:
    """Difference quotient -(M_2k - M_k) / k of M_n = max T_n(0), at the largest k."""
    if n_iters < 8:
        raise InvalidInputError("n_iters must be >= 8")
    M, m = [0.0], [0.0]
    limit = None
    for n, U in one_period_iterates(omega, model, grid, n_t, n_iters, v_cap, threads=threads):
        M.append(float(U.max()))
        m.append(float(U.min()))
        width = M[-1] - m[-1]
        if n == 1:
            limit = 10.0 * width + 1e-9
        elif width > limit:
            raise DivergenceError(f"oscillation of T_n(0) reached {width:.4g} at n = {n}, "
                                  f"above ten times its first-period value")
    k_max = n_iters // 2
    trace = [-(M[2 * k] - M[k]) / k for k in range(1, k_max + 1)]
    extras = {"M": M[1:], "m": m[1:], "M_over_n": [M[n] / n for n in range(1, n_iters + 1)],
              "m_over_n": [m[n] / n for n in range(1, n_iters + 1)],
              "width": [M[n] - m[n] for n in range(1, n_iters + 1)]}
    return CriticalValueEstimate(float(trace[-1]), SUBADDITIVE, n_iters, trace, extras=extras)


def alpha_both(omega, model, grid, n_t, n_max=4, w_max=2, n_iters=16, v_cap=DEFAULT_V_CAP, threads=1):
    a = alpha_closed_curves(omega, model, grid, n_t, n_max, w_max, v_cap, threads=threads)
    b = alpha_subadditive(omega, model, grid, n_t, n_iters, v_cap, threads=threads)
    a.discrepancy = b.discrepancy = abs(a.value - b.value)
    return a, b


def estimate_alpha(method: str, omega, model, grid, n_t, **kw) -> CriticalValueEstimate:
    if method in ("closed", CLOSED_CURVES):
        keys = ("n_max", "w_max", "v_cap", "threads")
        return alpha_closed_curves(omega, model, grid, n_t, **{k: v for k, v in kw.items() if k in keys})
    if method == SUBADDITIVE:
        keys = ("n_iters", "v_cap", "threads")
        return alpha_subadditive(omega, model, grid, n_t, **{k: v for k, v in kw.items() if k in keys})
    raise InvalidInputError(f"unknown method {method!r}")


@dataclass
class EnsembleResult:
    entries: list
    spread: float
    std: float


def alpha_ensemble(sys: SkewProductSystem, model: LagrangianModel, omega_seeds: Sequence[int],
                   method: str, grid: SpaceGrid, n_t: int, **kw) -> EnsembleResult:
    """Estimate alpha at omega sampled from each seed and report max - min and std."""
    if len(omega_seeds) < 1:
        raise InvalidInputError("need at least one seed")
    entries = []
    for seed in omega_seeds:
        omega = omega_from_seed(sys, int(seed))
        entries.append((int(seed), estimate_alpha(method, omega, model, grid, n_t, **kw)))
    vals = np.array([e.value for _, e in entries])
    return EnsembleResult(entries, float(vals.max() - vals.min()), float(vals.std()))


def shift_consistency(sys: SkewProductSystem, omega, s: float, model, method, grid, n_t, **kw) -> float:
    """|alpha(theta(s) omega) - alpha(omega)| for a grid-aligned shift s."""
    time_index(s, n_t)
    a = estimate_alpha(method, omega, model, grid, n_t, **kw).value
    b = estimate_alpha(method, theta(sys, s, omega), model, grid, n_t, **kw).value
    return abs(a - b)


# -- Peierls barrier ----------------------------------------------------------------------

@dataclass
class BarrierField:
    """Windowed-min barrier h((x, t), (y, s)); values[k] holds start time t_k = k * dt."""

    base_node: int
    base_time: float
    values: np.ndarray
    window: tuple
    alpha: float

    def at(self, x_index: int, t_index: int) -> float:
        return float(self.values[t_index].reshape(-1)[x_index])


def peierls_barrier(base_node: int, base_time: float, omega, model: LagrangianModel, alpha: float,
                    grid: SpaceGrid, n_t: int, window=(4, 12), v_cap: float = DEFAULT_V_CAP) -> BarrierField:
    """min over durations D in [n_lo, n_hi] periods ending at (y, s + n) of K + D * alpha.

    Durations are grid-aligned and run from every start node x and start time t_k,
    so D = n exactly on the diagonal t = s.
    """
    n_lo, n_hi = window
    if n_lo < 1 or n_hi < n_lo:
        raise InvalidInputError("window must satisfy 1 <= n_lo <= n_hi")
    prop = Propagator(model, omega, grid, n_t, v_cap)
    k_s = time_index(base_time, n_t)
    end = k_s + n_hi * n_t
    U = np.full(grid.shape, np.inf)
    U.reshape(-1)[base_node] = 0.0
    field_ = np.full((n_t,) + grid.shape, np.inf)
    lo_steps = n_lo * n_t - (n_t - 1)
    for m in range(1, n_hi * n_t + 1):
        U, _ = prop.step(U, end - m, forward=True)
        if m >= max(lo_steps, 1):
            k = (end - m) % n_t
            np.minimum(field_[k], U + m * prop.dt * alpha, out=field_[k])
    return BarrierField(int(base_node), k_s / n_t, field_, (n_lo, n_hi), float(alpha))


def barrier_diagonal(omega, model: LagrangianModel, alpha: float, grid: SpaceGrid, n_t: int,
                     window=(4, 12), nodes=None, time_indices=None, v_cap: float = DEFAULT_V_CAP,
                     threads: int = 1) -> np.ndarray:
    """h((x, t), (x, t)) for the requested nodes and start times; shape (len(times), len(nodes))."""
    n_lo, n_hi = window
    if n_lo < 1 or n_hi < n_lo:
        raise InvalidInputError("window must satisfy 1 <= n_lo <= n_hi")
    nodes = np.arange(grid.n_nodes) if nodes is None else np.atleast_1d(np.asarray(nodes, dtype=int))
    times = range(n_t) if time_indices is None else [int(k) for k in time_indices]
    prop = Propagator(model, omega, grid, n_t, v_cap, threads=threads)
    rows = np.arange(nodes.size)
    out = np.full((len(times), nodes.size), np.inf)
    for i, k in enumerate(times):
        U = np.full((nodes.size, grid.n_nodes), np.inf)
        U[rows, nodes] = 0.0
        U = U.reshape((nodes.size,) + grid.shape)
        for n in range(1, n_hi + 1):
            U = prop.propagate(U, k + (n - 1) * n_t, n_t)
            if n >= n_lo:
                vals = U.reshape(nodes.size, -1)[rows, nodes] + n * alpha
                np.minimum(out[i], vals, out=out[i])
    return out


def aubry_detect(diagonal: np.ndarray, tol: float, nodes=None, time_indices=None) -> set:
    """{(x_index, t_index)} where the barrier diagonal is <= tol."""
    diag = np.asarray(diagonal)
    nodes = np.arange(diag.shape[1]) if nodes is None else list(nodes)
    times = np.arange(diag.shape[0]) if time_indices is None else list(time_indices)
    ti, xi = np.nonzero(diag <= tol)
    return {(int(nodes[x]), int(times[t])) for t, x in zip(ti, xi)}


# -- closed measures ---------------------------------------------------------------------

@dataclass(frozen=True)
class TrigTest:
    """f(x, t) = cos or sin of 2 pi (k . x + kt * t)."""

    k: tuple
    kt: int
    kind: str = "cos"

    def gradients(self, x: np.ndarray, t: np.ndarray):
        arg = 2 * np.pi * (x @ np.asarray(self.k, dtype=float) + self.kt * t)
        df = -np.sin(arg) if self.kind == "cos" else np.cos(arg)
        scale = 2 * np.pi * df
        return scale[:, None] * np.asarray(self.k, dtype=float), scale * self.kt


def default_test_functions(d: int = 1) -> list:
    if d == 1:
        waves = [((1,), 0), ((0,), 1), ((1,), 1), ((1,), -1)]
    else:
        waves = [((1, 0), 0), ((0, 1), 0), ((0, 0), 1), ((1, 1), 1)]
    return [TrigTest(k, kt, kind) for k, kt in waves for kind in ("cos", "sin")]


def closed_measure_defect(curve: Curve, test_functions=None, tol: float = 1e-9) -> float:
    """max over f of |integral of d_x f . v + d_t f| against the occupation measure of a closed curve.

    Each segment carries weight dt / period and the integrand is taken at the
    segment midpoint.
    """
    period = curve.times[-1] - curve.times[0]
    wind = curve.lifted[-1] - curve.lifted[0]
    if abs(period - round(period)) > tol or round(period) < 1 or np.max(np.abs(wind - np.rint(wind))) > tol:
        raise InvalidInputError("curve is not closed over an integer period")
    tests = default_test_functions(curve.lifted.shape[1]) if test_functions is None else test_functions
    mid_x = 0.5 * (curve.lifted[1:] + curve.lifted[:-1])
    mid_t = 0.5 * (curve.times[1:] + curve.times[:-1])
    dts = np.diff(curve.times)
    worst = 0.0
    for f in tests:
        gx, gt = f.gradients(mid_x, mid_t)
        val = np.sum(dts * (np.sum(gx * curve.velocities, axis=1) + gt)) / period
        worst = max(worst, abs(float(val)))
    return worst


def closed_curve_excess(curve: Curve, alpha: float) -> float:
    """action + alpha * period; bounded below by minus grid slack for every closed curve."""
    return float(curve.action + alpha * (curve.times[-1] - curve.times[0]))
