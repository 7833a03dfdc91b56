"""Strict JSON experiment configuration."""
from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError, InvalidInputError
from .lagrangian import LagrangianModel
from .omega import INTERVAL_EXCHANGE, TORUS_ROTATION, SkewProductSystem, omega_from_seed
from .torus import SpaceGrid

NO_OMEGA = "none"


@dataclass
class OmegaSpaceConfig:
    kind: str = NO_OMEGA
    dim: int = 2
    alpha: list = field(default_factory=list)
    subdivision: int = 1
    permutation: list = field(default_factory=list)

    def validate(self, path):
        if self.kind not in (NO_OMEGA, INTERVAL_EXCHANGE, TORUS_ROTATION):
            raise ConfigurationError(f"{path}.kind: unknown omega space {self.kind!r}")
        _positive(self.dim, f"{path}.dim")
        _positive(self.subdivision, f"{path}.subdivision")


@dataclass
class LagrangianConfig:
    kind: str = "free_kinetic"
    mass: float = 1.0
    d: int = 1
    h_coeffs: list = field(default_factory=list)
    V_coeffs: list = field(default_factory=list)
    phase_map: str = "none"

    def validate(self, path):
        if self.kind not in ("free_kinetic", "time_forced", "mechanical", "pendulum"):
            raise ConfigurationError(f"{path}.kind: unknown lagrangian {self.kind!r}")
        _positive(self.mass, f"{path}.mass")
        if self.d not in (1, 2):
            raise ConfigurationError(f"{path}.d: must be 1 or 2")


@dataclass
class GridConfig:
    n_per_dim: int = 64
    n_t: int = 64
    v_cap: float = 4.0
    w_max: int = 2

    def validate(self, path):
        _positive(self.n_per_dim, f"{path}.n_per_dim", integer=True)
        _positive(self.n_t, f"{path}.n_t", integer=True)
        _positive(self.v_cap, f"{path}.v_cap")
        if not isinstance(self.w_max, int) or self.w_max < 0:
            raise ConfigurationError(f"{path}.w_max: must be a non-negative integer")


@dataclass
class ToleranceConfig:
    alpha_cross: float = 0.05
    calibration: float = 0.02
    subsolution: float = 0.05
    equivariance: float = 1e-10
    lipschitz: float = 1.05
    minimizer: float = 0.05
    bset: float = 0.02

    def validate(self, path):
        for f in dataclasses.fields(self):
            _positive(getattr(self, f.name), f"{path}.{f.name}")


@dataclass
class SolverConfig:
    n_burn: int = 16
    n_max: int = 128
    alpha_n_max: int = 4
    alpha_n_iters: int = 16
    alpha: Optional[float] = None
    barrier_window: list = field(default_factory=lambda: [4, 12])
    horizon: float = 8.0
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)

    def validate(self, path):
        if not isinstance(self.n_burn, int) or self.n_burn < 0:
            raise ConfigurationError(f"{path}.n_burn: must be a non-negative integer")
        _positive(self.n_max, f"{path}.n_max", integer=True)
        if self.n_burn >= self.n_max:
            raise ConfigurationError(f"{path}.n_burn: must be below {path}.n_max")
        _positive(self.alpha_n_max, f"{path}.alpha_n_max", integer=True)
        if not isinstance(self.alpha_n_iters, int) or self.alpha_n_iters < 8:
            raise ConfigurationError(f"{path}.alpha_n_iters: must be an integer >= 8")
        if len(self.barrier_window) != 2 or not 1 <= self.barrier_window[0] <= self.barrier_window[1]:
            raise ConfigurationError(f"{path}.barrier_window: need [n_lo, n_hi] with 1 <= n_lo <= n_hi")
        _positive(self.horizon, f"{path}.horizon")
        self.tolerances.validate(f"{path}.tolerances")


@dataclass
class SeedConfig:
    root: int = 0
    omega: int = 0

    def validate(self, path):
        for name in ("root", "omega"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 0:
                raise ConfigurationError(f"{path}.{name}: must be a non-negative integer")


@dataclass
class ExperimentConfig:
    omega_space: OmegaSpaceConfig = field(default_factory=OmegaSpaceConfig)
    lagrangian: LagrangianConfig = field(default_factory=LagrangianConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    output_prefix: str = "out/run"
    name: str = "experiment"

    def validate(self):
        self.omega_space.validate("omega_space")
        self.lagrangian.validate("lagrangian")
        self.grid.validate("grid")
        self.solver.validate("solver")
        self.seeds.validate("seeds")
        if self.lagrangian.phase_map == "example1" and self.omega_space.kind != INTERVAL_EXCHANGE:
            raise ConfigurationError("lagrangian.phase_map: 'example1' needs omega_space.kind 'interval_exchange'")
        if self.lagrangian.phase_map == "example2_pi" and self.omega_space.kind != TORUS_ROTATION:
            raise ConfigurationError("lagrangian.phase_map: 'example2_pi' needs omega_space.kind 'torus_rotation'")
        try:
            self.build_model()
            self.build_system()
        except InvalidInputError as exc:
            raise ConfigurationError(str(exc)) from exc
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    # -- builders ---------------------------------------------------------------------
    def build_model(self) -> LagrangianModel:
        c = self.lagrangian
        if c.kind == "free_kinetic":
            return LagrangianModel.free_kinetic(c.mass, c.d, c.phase_map)
        if c.kind == "time_forced":
            return LagrangianModel.time_forced(c.h_coeffs, c.mass, c.d, c.phase_map)
        if c.kind == "pendulum":
            return LagrangianModel.pendulum(c.d, c.phase_map)
        return LagrangianModel.mechanical(c.V_coeffs, c.mass, c.d, c.h_coeffs, c.phase_map)

    def build_system(self) -> Optional[SkewProductSystem]:
        c = self.omega_space
        if c.kind == NO_OMEGA:
            return None
        if c.kind == INTERVAL_EXCHANGE:
            return SkewProductSystem.interval_exchange()
        return SkewProductSystem.torus_rotation(c.dim, tuple(c.alpha), c.subdivision, tuple(c.permutation))

    def build_grid(self) -> SpaceGrid:
        return SpaceGrid(self.grid.n_per_dim, self.lagrangian.d)

    def omega(self, seed: Optional[int] = None):
        sys = self.build_system()
        if sys is None:
            return None
        return omega_from_seed(sys, self.seeds.omega if seed is None else seed)


def _positive(value, path, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{path}: expected a number, got {value!r}")
    if integer and not isinstance(value, int):
        raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
    if not value > 0:
        raise ConfigurationError(f"{path}: must be positive, got {value!r}")


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path or 'config'}: expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigurationError(f"unknown key {where}{unknown[0]}")
    kwargs = {}
    for key, value in data.items():
        f = names[key]
        sub = f"{path}.{key}" if path else key
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, sub)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "").validate()


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    """Apply dotted ``key=value`` overrides; values are parsed as JSON when possible."""
    data = copy.deepcopy(data)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override {key}: {p} is not an object")
        node[parts[-1]] = _parse_value(text)
    return data


def load_config(path, overrides=()) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(apply_overrides(data, overrides))
