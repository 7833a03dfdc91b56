"""Probability space Omega with the measure-preserving skew-product flow theta(s, .).

Two systems are provided:

* ``interval_exchange``: Omega = [0, 1) with the three-piece exchange map f
  (breakpoints 1/3, 2/3) and theta(t, w) = f^{-1}((t + f(w)) mod 1).
* ``torus_rotation``: Omega = T^n with a cube permutation f on the n^dim
  subdivision cubes and theta(t, w) = f^{-1}(phi(t) f(w)), phi(t) the linear
  translation by t * (1, alpha_2, ..., alpha_dim).

The law on Omega is Lebesgue (uniform) in both cases.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .torus import wrap_array

INTERVAL_EXCHANGE = "interval_exchange"
TORUS_ROTATION = "torus_rotation"
KINDS = (INTERVAL_EXCHANGE, TORUS_ROTATION)

_THIRD = 1.0 / 3.0
_TWO_THIRDS = 2.0 / 3.0


@dataclass(frozen=True)
class OmegaPoint:
    kind: str
    coords: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown omega kind {self.kind!r}")
        arr = np.atleast_1d(np.asarray(self.coords, dtype=float))
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("non-finite omega coordinates")
        arr = wrap_array(arr)
        object.__setattr__(self, "coords", tuple(float(c) for c in arr))

    def array(self) -> np.ndarray:
        return np.array(self.coords)


def exchange_f(w):
    """The piecewise map of the interval-exchange example (vectorised)."""
    w = np.asarray(w, dtype=float)
    return np.where(w < _THIRD, w, np.where(w < _TWO_THIRDS, w + _THIRD, w - _THIRD))


def exchange_f_inv(y):
    y = np.asarray(y, dtype=float)
    return np.where(y < _THIRD, y, np.where(y < _TWO_THIRDS, y + _THIRD, y - _THIRD))


def _default_alpha(dim: int) -> tuple:
    # (1, sqrt 2, sqrt 3, sqrt 5, ...) over the first primes
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    return (1.0,) + tuple(math.sqrt(p) for p in primes[: dim - 1])


@dataclass(frozen=True)
class SkewProductSystem:
    kind: str
    dim: int = 1
    alpha: tuple = ()
    subdivision: int = 1
    permutation: tuple = ()
    _inverse: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown omega_space kind {self.kind!r}")
        if self.kind == INTERVAL_EXCHANGE:
            if self.dim != 1:
                raise InvalidInputError("interval_exchange has dim 1")
            return
        if self.dim < 1:
            raise InvalidInputError("omega_space.dim must be >= 1")
        alpha = tuple(float(a) for a in self.alpha) if self.alpha else _default_alpha(self.dim)
        if len(alpha) != self.dim:
            raise InvalidInputError(f"omega_space.alpha needs {self.dim} entries, got {len(alpha)}")
        if alpha[0] != 1.0:
            raise InvalidInputError("omega_space.alpha must start with 1")
        if self.subdivision < 1:
            raise InvalidInputError("omega_space.subdivision must be >= 1")
        n_cubes = self.subdivision ** self.dim
        perm = tuple(int(p) for p in self.permutation) if self.permutation else tuple(range(n_cubes))
        if sorted(perm) != list(range(n_cubes)):
            raise InvalidInputError(f"omega_space.permutation must permute range({n_cubes})")
        inverse = [0] * n_cubes
        for i, p in enumerate(perm):
            inverse[p] = i
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "permutation", perm)
        object.__setattr__(self, "_inverse", tuple(inverse))

    @classmethod
    def interval_exchange(cls) -> "SkewProductSystem":
        return cls(INTERVAL_EXCHANGE)

    @classmethod
    def torus_rotation(cls, dim=2, alpha=(), subdivision=1, permutation=()) -> "SkewProductSystem":
        return cls(TORUS_ROTATION, dim=dim, alpha=tuple(alpha), subdivision=subdivision,
                   permutation=tuple(permutation))

    # -- the one-to-one map f and its inverse -------------------------------------------
    def _permute(self, w: np.ndarray, table) -> np.ndarray:
        n = self.subdivision
        cell = np.minimum(np.floor(w * n).astype(int), n - 1)
        flat = np.ravel_multi_index(tuple(np.moveaxis(cell, -1, 0)), (n,) * self.dim)
        target = np.asarray(table)[flat]
        target_cell = np.stack(np.unravel_index(target, (n,) * self.dim), axis=-1)
        return wrap_array(w + (target_cell - cell) / n)

    def f(self, w: np.ndarray) -> np.ndarray:
        if self.kind == INTERVAL_EXCHANGE:
            return exchange_f(w)
        return self._permute(np.asarray(w, dtype=float), self.permutation)

    def f_inv(self, y: np.ndarray) -> np.ndarray:
        if self.kind == INTERVAL_EXCHANGE:
            return exchange_f_inv(y)
        return self._permute(np.asarray(y, dtype=float), self._inverse)

    def translate(self, s: float, y: np.ndarray) -> np.ndarray:
        """The linear flow phi(s) on the torus (reduction mod 1)."""
        if self.kind == INTERVAL_EXCHANGE:
            return wrap_array(np.asarray(s + y, dtype=float))
        return wrap_array(np.asarray(y, dtype=float) + s * np.asarray(self.alpha))

    def theta_array(self, s, w: np.ndarray) -> np.ndarray:
        """Vectorised theta; ``w`` has shape (..., dim) for torus rotation, (...) otherwise."""
        return self.f_inv(self.translate(s, self.f(w)))

    def owns(self, omega: OmegaPoint) -> bool:
        return omega.kind == self.kind and len(omega.coords) == self.dim

    def point(self, coords) -> OmegaPoint:
        return OmegaPoint(self.kind, tuple(np.atleast_1d(coords)))


def _check(sys: SkewProductSystem, omega: OmegaPoint):
    if not sys.owns(omega):
        raise InvalidInputError(f"omega of kind {omega.kind!r}/dim {len(omega.coords)} "
                                f"does not belong to {sys.kind!r}/dim {sys.dim}")


def theta(sys: SkewProductSystem, s: float, omega: OmegaPoint) -> OmegaPoint:
    _check(sys, omega)
    if not np.isfinite(s):
        raise InvalidInputError("non-finite time")
    w = omega.array()
    if sys.kind == INTERVAL_EXCHANGE:
        out = sys.theta_array(s, w[0])
        return OmegaPoint(sys.kind, (float(out),))
    return OmegaPoint(sys.kind, tuple(sys.theta_array(s, w)))


def _omega_samples(sys: SkewProductSystem, rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.random((n, sys.dim))


def sample_omega(sys: SkewProductSystem, seed: int) -> OmegaPoint:
    """Deterministic uniform draw from Omega."""
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return OmegaPoint(sys.kind, tuple(_omega_samples(sys, rng, 1)[0]))


def derive_seed(root: int, tag: str) -> int:
    """Per-component seed: root XOR the first 8 bytes of sha256(tag)."""
    digest = int.from_bytes(hashlib.sha256(tag.encode()).digest()[:8], "little")
    return (int(root) ^ digest) & 0xFFFFFFFFFFFFFFFF


def omega_from_seed(sys: SkewProductSystem, seed: int) -> OmegaPoint:
    """The omega sample used by every experiment for a user-facing omega seed."""
    return sample_omega(sys, derive_seed(seed, "omega"))


def omega_distance(a, b) -> float:
    """Circular (torus) distance between two omega coordinate vectors."""
    a = np.atleast_1d(np.asarray(a.coords if isinstance(a, OmegaPoint) else a, dtype=float))
    b = np.atleast_1d(np.asarray(b.coords if isinstance(b, OmegaPoint) else b, dtype=float))
    delta = np.abs(np.mod(a - b + 0.5, 1.0) - 0.5)
    return float(np.max(delta))


def check_group_law(sys: SkewProductSystem, trials: int, seed: int, time_scale: float = 5.0,
                    zero_times: bool = False) -> float:
    """Max defect of theta(s, theta(t, w)) = theta(s + t, w) over random (s, t, w)."""
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    w = _omega_samples(sys, rng, trials)
    if zero_times:
        s = np.zeros(trials)
        t = np.zeros(trials)
    else:
        s = rng.uniform(-time_scale, time_scale, trials)
        t = rng.uniform(-time_scale, time_scale, trials)
    if sys.kind == INTERVAL_EXCHANGE:
        w = w[:, 0]
        lhs = sys.theta_array(s, sys.theta_array(t, w))
        rhs = sys.theta_array(s + t, w)
        delta = np.abs(np.mod(lhs - rhs + 0.5, 1.0) - 0.5)
    else:
        lhs = sys.theta_array(s[:, None], sys.theta_array(t[:, None], w))
        rhs = sys.theta_array((s + t)[:, None], w)
        delta = np.abs(np.mod(lhs - rhs + 0.5, 1.0) - 0.5)
    return float(np.max(delta))


def check_inverse(sys: SkewProductSystem, trials: int, seed: int) -> float:
    """Max circular defect of f(f^{-1}(y)) = y and f^{-1}(f(w)) = w over random samples."""
    rng = np.random.default_rng(seed)
    w = _omega_samples(sys, rng, trials)
    if sys.kind == INTERVAL_EXCHANGE:
        w = w[:, 0]
    a = np.abs(np.mod(sys.f(sys.f_inv(w)) - w + 0.5, 1.0) - 0.5)
    b = np.abs(np.mod(sys.f_inv(sys.f(w)) - w + 0.5, 1.0) - 0.5)
    return float(max(a.max(), b.max()))


def histogram_deviation(values: np.ndarray, bins: int) -> float:
    counts, _ = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return float(np.max(np.abs(counts / values.size - 1.0 / bins)))


def check_measure_preservation(sys: SkewProductSystem, t: float, samples: int, bins: int,
                               seed: int) -> float:
    """Push uniform samples through theta(t) and return the worst bin-frequency deviation.

    For torus rotation every marginal is binned and the worst one reported.
    """
    if samples < bins * 100:
        raise InvalidInputError(f"need samples >= 100 * bins, got {samples} < {100 * bins}")
    rng = np.random.default_rng(seed)
    w = _omega_samples(sys, rng, samples)
    if sys.kind == INTERVAL_EXCHANGE:
        pushed = sys.theta_array(t, w[:, 0])[:, None]
    else:
        pushed = sys.theta_array(t, w)
    return max(histogram_deviation(pushed[:, i], bins) for i in range(pushed.shape[1]))


def phase_example1(sys: SkewProductSystem, omega: OmegaPoint) -> float:
    """Time shift f(w) attached to the interval-exchange example."""
    _check(sys, omega)
    return float(sys.f(np.array(omega.coords[0])))


def phase_example2(omega: OmegaPoint) -> float:
    """Time shift pi(w) = first coordinate, as attached to the torus-rotation example."""
    return float(omega.coords[0])
