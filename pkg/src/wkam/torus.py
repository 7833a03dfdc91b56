"""Flat torus T^d = R^d / Z^d: wrapping, minimal displacements, lifts and grids."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


def _as_vector(raw) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(raw, dtype=float))
    if arr.ndim != 1:
        raise InvalidInputError(f"expected a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"non-finite coordinates: {arr}")
    return arr


def wrap_array(a: np.ndarray) -> np.ndarray:
    """Componentwise reduction mod 1 into [0, 1) for arbitrary-shaped arrays."""
    out = np.mod(a, 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(out >= 1.0, 0.0, out)


def centered_array(a: np.ndarray) -> np.ndarray:
    """Reduce mod 1 into [-1/2, 1/2)."""
    return np.mod(np.asarray(a, dtype=float) + 0.5, 1.0) - 0.5


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple

    def __post_init__(self):
        arr = wrap_array(_as_vector(self.coords))
        object.__setattr__(self, "coords", tuple(float(c) for c in arr))

    @property
    def d(self) -> int:
        return len(self.coords)

    def array(self) -> np.ndarray:
        return np.array(self.coords)


@dataclass(frozen=True)
class TangentVector:
    comps: tuple

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(float(c) for c in _as_vector(self.comps)))

    def array(self) -> np.ndarray:
        return np.array(self.comps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.comps))


def wrap(raw) -> TorusPoint:
    return TorusPoint(tuple(_as_vector(raw)))


def _coords(p) -> np.ndarray:
    if isinstance(p, TorusPoint):
        return p.array()
    return _as_vector(p)


def displacement(a, b) -> np.ndarray:
    """Minimal-norm lift of ``b - a``, components in [-1/2, 1/2].

    An exact half-period component resolves to +1/2.
    """
    xa, xb = _coords(a), _coords(b)
    if xa.shape != xb.shape:
        raise InvalidInputError(f"dimension mismatch: {xa.shape} vs {xb.shape}")
    delta = np.mod(xb - xa, 1.0)
    delta[delta >= 1.0] = 0.0
    delta[delta > 0.5] -= 1.0
    return delta


def torus_distance(a, b) -> float:
    return float(np.linalg.norm(displacement(a, b)))


def winding_lifts(a, b, w_max: int) -> list[np.ndarray]:
    """All lifts ``b - a + w`` with integer ``w``, ``|w_i| <= w_max``.

    The base lift uses the minimal displacement, so the list always contains it.
    """
    if int(w_max) != w_max or w_max < 0:
        raise InvalidInputError(f"w_max must be a nonnegative integer, got {w_max}")
    base = displacement(a, b)
    rng = range(-int(w_max), int(w_max) + 1)
    return [base + np.array(w, dtype=float) for w in itertools.product(rng, repeat=base.size)]


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform node-aligned grid ``{k / n_per_dim}^d`` on T^d."""

    n_per_dim: int
    d: int = 1

    def __post_init__(self):
        if int(self.n_per_dim) != self.n_per_dim or self.n_per_dim < 1:
            raise InvalidInputError(f"n_per_dim must be a positive integer, got {self.n_per_dim}")
        if self.d not in (1, 2):
            raise InvalidInputError(f"only d in (1, 2) is supported, got {self.d}")

    @property
    def dx(self) -> float:
        return 1.0 / self.n_per_dim

    @property
    def shape(self) -> tuple:
        return (self.n_per_dim,) * self.d

    @property
    def n_nodes(self) -> int:
        return self.n_per_dim ** self.d

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (d,)``."""
        axes = [np.arange(self.n_per_dim) / self.n_per_dim] * self.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def centered_points(self) -> np.ndarray:
        """Node coordinates with representatives in [-1/2, 1/2); mirror-symmetric exactly."""
        k = np.arange(self.n_per_dim)
        k = np.where(k >= (self.n_per_dim + 1) // 2, k - self.n_per_dim, k)
        axes = [k / self.n_per_dim] * self.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def index_to_multi(self, index: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(int(index), self.shape))

    def multi_to_index(self, multi) -> int:
        multi = tuple(int(m) % self.n_per_dim for m in np.atleast_1d(multi))
        return int(np.ravel_multi_index(multi, self.shape))

    def point(self, index: int) -> TorusPoint:
        return TorusPoint(tuple(np.array(self.index_to_multi(index)) / self.n_per_dim))

    def nearest_index(self, p) -> int:
        x = wrap_array(_coords(p).copy())
        multi = np.rint(x * self.n_per_dim).astype(int) % self.n_per_dim
        return self.multi_to_index(multi)
