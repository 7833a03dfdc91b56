"""Time-periodic Tonelli Lagrangians driven by a skew-product phase.

Built-in models have the form

    L(x, v, t, w) = m/2 |v|^2 + h(tau) - V(x, tau),    tau = t + phase(w),

with h and V trigonometric polynomials of period 1, so every derivative and the
Legendre transform are available in closed form.  ``custom`` models wrap an
arbitrary callable and fall back to finite differences and a numeric Legendre
transform.

All evaluation functions broadcast: positions and velocities carry the space
dimension on the last axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import InvalidInputError, LegendreError, TonelliViolation
from .omega import (INTERVAL_EXCHANGE, TORUS_ROTATION, OmegaPoint, SkewProductSystem,
                    exchange_f, theta)
from .torus import centered_array

TWO_PI = 2.0 * np.pi

FREE_KINETIC = "free_kinetic"
TIME_FORCED = "time_forced"
MECHANICAL = "mechanical"
CUSTOM = "custom"
MODEL_KINDS = (FREE_KINETIC, TIME_FORCED, MECHANICAL, CUSTOM)

PHASE_MAPS = ("example1", "example2_pi", "none")

FD_STEP = 1e-5


@dataclass(frozen=True)
class LagrangianModel:
    kind: str
    mass: float = 1.0
    h_coeffs: tuple = ()
    V_coeffs: tuple = ()
    phase_map: str = "none"
    d: int = 1
    func: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidInputError(f"unknown lagrangian kind {self.kind!r}")
        if self.phase_map not in PHASE_MAPS:
            raise InvalidInputError(f"unknown phase_map {self.phase_map!r}")
        if not self.mass > 0:
            raise InvalidInputError("lagrangian.mass must be positive")
        if self.d not in (1, 2):
            raise InvalidInputError("only d in (1, 2) supported")
        h = tuple((int(k), float(a), float(b)) for k, a, b in self.h_coeffs)
        V = []
        for term in self.V_coeffs:
            if len(term) != self.d + 2:
                raise InvalidInputError(f"V term {term} needs {self.d} space wavenumbers, k_t and c")
            V.append(tuple(int(k) for k in term[:-1]) + (float(term[-1]),))
        object.__setattr__(self, "h_coeffs", h)
        object.__setattr__(self, "V_coeffs", tuple(V))
        if self.kind == CUSTOM and self.func is None:
            raise InvalidInputError("custom models need a callable func(x, v, tau)")
        if self.kind == FREE_KINETIC and (h or V):
            raise InvalidInputError("free_kinetic takes no h or V coefficients")

    # -- constructors ---------------------------------------------------------------
    @classmethod
    def free_kinetic(cls, mass=1.0, d=1, phase_map="none"):
        return cls(FREE_KINETIC, mass=mass, d=d, phase_map=phase_map)

    @classmethod
    def time_forced(cls, h_coeffs, mass=1.0, d=1, phase_map="example1"):
        return cls(TIME_FORCED, mass=mass, h_coeffs=tuple(h_coeffs), d=d, phase_map=phase_map)

    @classmethod
    def mechanical(cls, V_coeffs, mass=1.0, d=1, h_coeffs=(), phase_map="none"):
        return cls(MECHANICAL, mass=mass, V_coeffs=tuple(V_coeffs), h_coeffs=tuple(h_coeffs),
                   d=d, phase_map=phase_map)

    @classmethod
    def pendulum(cls, d=1, phase_map="none"):
        """V(x) = cos(2 pi x): unstable equilibrium at x = 0, critical value 1."""
        return cls.mechanical([(1,) + (0,) * (d - 1) + (0, 1.0)], d=d, phase_map=phase_map)

    @classmethod
    def custom(cls, func, d=1, phase_map="none"):
        return cls(CUSTOM, func=func, d=d, phase_map=phase_map)

    @property
    def closed_form(self) -> bool:
        return self.kind != CUSTOM

    # -- phase ----------------------------------------------------------------------
    def phase(self, omega: Optional[OmegaPoint]) -> float:
        if self.phase_map == "none" or omega is None:
            return 0.0
        if self.phase_map == "example1":
            if omega.kind != INTERVAL_EXCHANGE:
                raise InvalidInputError("phase_map 'example1' needs an interval_exchange omega")
            return float(exchange_f(omega.coords[0]))
        if omega.kind != TORUS_ROTATION:
            raise InvalidInputError("phase_map 'example2_pi' needs a torus_rotation omega")
        return float(omega.coords[0])

    # -- trigonometric data -----------------------------------------------------------
    def h(self, tau):
        tau = np.asarray(tau, dtype=float)
        out = np.zeros_like(tau)
        for k, a, b in self.h_coeffs:
            out = out + a * np.cos(TWO_PI * k * tau) + b * np.sin(TWO_PI * k * tau)
        return out

    def dh(self, tau):
        tau = np.asarray(tau, dtype=float)
        out = np.zeros_like(tau)
        for k, a, b in self.h_coeffs:
            out = out + TWO_PI * k * (-a * np.sin(TWO_PI * k * tau) + b * np.cos(TWO_PI * k * tau))
        return out

    def _V_terms(self, x, tau):
        xc = centered_array(x)
        for term in self.V_coeffs:
            kx = np.array(term[: self.d], dtype=float)
            kt, c = term[self.d], term[self.d + 1]
            arg = xc @ kx if kt == 0 else xc @ kx + kt * tau
            yield kx, kt, c, TWO_PI * arg

    def V(self, x, tau):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(tau)))
        for _, _, c, arg in self._V_terms(x, tau):
            out = out + c * np.cos(arg)
        return out

    def grad_V(self, x, tau):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape[:-1], np.shape(tau)) + (self.d,))
        for kx, _, c, arg in self._V_terms(x, tau):
            out = out - (c * TWO_PI * np.sin(arg))[..., None] * kx
        return out

    # -- the Lagrangian -------------------------------------------------------------
    def tau(self, t, omega):
        return np.asarray(t, dtype=float) + self.phase(omega)

    def lagrangian(self, x, v, t, omega=None):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        tau = self.tau(t, omega)
        if self.kind == CUSTOM:
            return np.asarray(self.func(x, v, tau), dtype=float)
        out = 0.5 * self.mass * np.sum(v * v, axis=-1)
        if self.h_coeffs:
            out = out + self.h(tau)
        if self.V_coeffs:
            out = out - self.V(x, tau)
        return np.broadcast_to(out, np.broadcast_shapes(
            x.shape[:-1], v.shape[:-1], np.shape(tau))).copy()


def _vec(a, d):
    arr = np.asarray(a.array() if hasattr(a, "array") else a, dtype=float)
    arr = np.atleast_1d(arr)
    if arr.shape[-1] != d:
        raise InvalidInputError(f"expected last axis of length {d}, got shape {arr.shape}")
    return arr


def eval_L(model: LagrangianModel, x, v, t, omega=None):
    """L(x, v, t, w); scalar inputs return a float."""
    out = model.lagrangian(_vec(x, model.d), _vec(v, model.d), t, omega)
    return float(out) if np.ndim(out) == 0 else out


def _fd_grad(fun, z, d, step=FD_STEP):
    grads = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        grads.append((fun(z + e) - fun(z - e)) / (2 * step))
    return np.stack(grads, axis=-1)


def partials(model: LagrangianModel, x, v, t, omega=None):
    """(dL/dx, dL/dv).  dL/dv is the momentum conjugate to v."""
    x = _vec(x, model.d)
    v = _vec(v, model.d)
    if model.closed_form:
        tau = model.tau(t, omega)
        shape = np.broadcast_shapes(x.shape, v.shape)
        lx = np.broadcast_to(-model.grad_V(x, tau), shape) if model.V_coeffs else np.zeros(shape)
        lv = np.broadcast_to(model.mass * v, shape).copy()
        return np.array(lx, dtype=float), lv
    lx = _fd_grad(lambda z: model.lagrangian(z, v, t, omega), x, model.d)
    lv = _fd_grad(lambda z: model.lagrangian(x, z, t, omega), v, model.d)
    return lx, lv


def velocity_hessian(model: LagrangianModel, x, v, t, omega=None, step=1e-4):
    """d^2 L / dv^2 at a single point, shape (d, d)."""
    x = _vec(x, model.d)
    v = _vec(v, model.d)
    if model.closed_form:
        return model.mass * np.eye(model.d)
    d = model.d
    hess = np.zeros((d, d))
    f = lambda z: float(model.lagrangian(x, z, t, omega))  # noqa: E731
    for i in range(d):
        for j in range(d):
            ei = np.zeros(d)
            ej = np.zeros(d)
            ei[i] = step
            ej[j] = step
            hess[i, j] = (f(v + ei + ej) - f(v + ei - ej) - f(v - ei + ej) + f(v - ei - ej)) / (4 * step * step)
    return 0.5 * (hess + hess.T)


@dataclass(frozen=True)
class HamiltonianView:
    model: LagrangianModel
    mode: str = "closed"
    v_cap: float = 8.0

    def __post_init__(self):
        if self.mode not in ("closed", "numeric"):
            raise InvalidInputError(f"unknown Legendre mode {self.mode!r}")
        if self.mode == "closed" and not self.model.closed_form:
            object.__setattr__(self, "mode", "numeric")


def _closed_H(model, x, p, t, omega):
    tau = model.tau(t, omega)
    out = np.sum(p * p, axis=-1) / (2 * model.mass)
    if model.h_coeffs:
        out = out - model.h(tau)
    if model.V_coeffs:
        out = out + model.V(x, tau)
    return out


def _numeric_H(model, x, p, t, omega, v_cap):
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    d = model.d
    n = 4001 if d == 1 else 201
    axis = np.linspace(-v_cap, v_cap, n)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    grid = grid[np.linalg.norm(grid, axis=1) <= v_cap]
    vals = grid @ p - model.lagrangian(x, grid, t, omega)
    best = grid[int(np.argmax(vals))]

    def neg(v):
        return -(float(v @ p) - float(model.lagrangian(x, v, t, omega)))

    res = optimize.minimize(neg, best, method="BFGS", options={"gtol": 1e-11})
    v_star = res.x if -res.fun >= vals.max() else best
    value = max(-res.fun, float(vals.max()))
    if np.linalg.norm(v_star) >= v_cap * (1 - 1e-9) or not np.isfinite(value):
        raise LegendreError(f"supremum not attained inside |v| <= {v_cap} at p={p}", best=value)
    return value, v_star


def hamiltonian(view: HamiltonianView, x, p, t, omega=None):
    """H(x, p, t, w) = sup_v { p.v - L(x, v, t, w) }."""
    model = view.model
    x = _vec(x, model.d)
    p = _vec(p, model.d)
    if view.mode == "closed":
        out = _closed_H(model, x, p, t, omega)
        return float(out) if np.ndim(out) == 0 else out
    if x.ndim > 1 or p.ndim > 1:
        xs, ps = np.broadcast_arrays(x, p)
        flat = [_numeric_H(model, xi, pi, t, omega, view.v_cap)[0]
                for xi, pi in zip(xs.reshape(-1, model.d), ps.reshape(-1, model.d))]
        return np.array(flat).reshape(xs.shape[:-1])
    return _numeric_H(model, x, p, t, omega, view.v_cap)[0]


def dH_dp(view: HamiltonianView, x, p, t, omega=None):
    """The velocity realising the supremum, v = dH/dp."""
    model = view.model
    x = _vec(x, model.d)
    p = _vec(p, model.d)
    if view.mode == "closed":
        return np.broadcast_to(p / model.mass, np.broadcast_shapes(x.shape, p.shape)).copy()
    return _numeric_H(model, x, p, t, omega, view.v_cap)[1]


def el_acceleration(model: LagrangianModel, x, v, t, omega=None):
    """Acceleration of the Euler-Lagrange flow at (x, v, t).

    Solves L_vv a = L_x - L_xv v - L_tv.
    """
    x = _vec(x, model.d)
    v = _vec(v, model.d)
    if model.closed_form:
        lx, _ = partials(model, x, v, t, omega)
        return lx / model.mass
    if x.ndim > 1:
        return np.stack([el_acceleration(model, xi, vi, t, omega)
                         for xi, vi in zip(*[a.reshape(-1, model.d) for a in np.broadcast_arrays(x, v)])])
    d = model.d
    step = 1e-4
    hess = velocity_hessian(model, x, v, t, omega)
    eig = np.linalg.eigvalsh(hess)
    if eig.min() <= 1e-8 * max(1.0, abs(eig.max())):
        raise TonelliViolation(f"velocity Hessian not positive definite at x={x}, v={v}: {eig}")
    lx, _ = partials(model, x, v, t, omega)
    lv = lambda xx, vv, tt: partials(model, xx, vv, tt, omega)[1]  # noqa: E731
    mixed = np.zeros(d)
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        mixed += (lv(x + e, v, t) - lv(x - e, v, t)) / (2 * step) * v[j]
    ltv = (lv(x, v, t + step) - lv(x, v, t - step)) / (2 * step)
    return np.linalg.solve(hess, lx - mixed - ltv)


# -- Tonelli validation -------------------------------------------------------------------

@dataclass
class CheckResult:
    passed: bool
    value: float
    witness: Optional[dict] = None


@dataclass
class TonelliReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> list:
        return [name for name, c in self.checks.items() if not c.passed]

    def as_dict(self) -> dict:
        return {name: {"passed": c.passed, "value": c.value, "witness": c.witness}
                for name, c in self.checks.items()}


def validate_tonelli(model: LagrangianModel, budget: int = 200, seed: int = 0,
                     system: Optional[SkewProductSystem] = None, omega: Optional[OmegaPoint] = None,
                     tol: float = 1e-10) -> TonelliReport:
    """Sample-based check of periodicity, convexity, superlinearity and phase matching."""
    rng = np.random.default_rng(seed)
    d = model.d
    xs = rng.random((budget, d))
    vs = rng.normal(scale=2.0, size=(budget, d))
    ts = rng.uniform(-3, 3, budget)
    if omega is None and system is not None:
        from .omega import sample_omega
        omega = sample_omega(system, seed)
    checks = {}

    l0 = model.lagrangian(xs, vs, ts, omega)
    l1 = model.lagrangian(xs, vs, ts + 1.0, omega)
    per = np.abs(l1 - l0)
    i = int(np.argmax(per))
    checks["periodicity"] = CheckResult(bool(per[i] <= tol * max(1.0, np.abs(l0).max())), float(per[i]),
                                        {"x": xs[i].tolist(), "v": vs[i].tolist(), "t": float(ts[i])})

    n_hess = min(budget, 50)
    worst, witness = np.inf, None
    for j in range(n_hess):
        eig = np.linalg.eigvalsh(velocity_hessian(model, xs[j], vs[j], ts[j], omega))
        if eig.min() < worst:
            worst, witness = float(eig.min()), {"x": xs[j].tolist(), "v": vs[j].tolist(), "t": float(ts[j])}
    checks["convexity"] = CheckResult(bool(worst > 1e-6), worst, witness)

    dirs = rng.normal(size=(budget, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    ratios = [model.lagrangian(xs, r * dirs, ts, omega) / r for r in (10.0, 20.0, 40.0)]
    incr = np.minimum(ratios[1] - ratios[0], ratios[2] - ratios[1])
    k = int(np.argmin(incr))
    checks["superlinearity"] = CheckResult(bool(incr[k] > 0), float(incr[k]),
                                           {"x": xs[k].tolist(), "direction": dirs[k].tolist()})

    if system is not None and model.phase_map != "none":
        s_vals = rng.uniform(-3, 3, budget)
        resid = np.zeros(budget)
        for j in range(budget):
            shifted = theta(system, s_vals[j], omega)
            a = model.lagrangian(xs[j], vs[j], ts[j] + s_vals[j], omega)
            b = model.lagrangian(xs[j], vs[j], ts[j], shifted)
            resid[j] = abs(float(a) - float(b))
        j = int(np.argmax(resid))
        checks["phase_matching"] = CheckResult(bool(resid[j] <= 1e-12 * max(1.0, np.abs(l0).max())),
                                               float(resid[j]), {"s": float(s_vals[j]), "t": float(ts[j])})
    return TonelliReport(checks)
