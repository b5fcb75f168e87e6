"""Discretization of R x S^(d-1): directions, offsets, sinograms.

A sinogram stores samples ``g(t_i, xi_j)`` in an array of shape
``(n_t, n_dirs)``.  The full sphere is kept (no half-sphere folding) so that
non-even data stays representable and :func:`even_part` has work to do.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np

__all__ = [
    "DirectionSet",
    "RadialGrid",
    "SphericalGrid",
    "Sinogram",
    "sphere_area",
    "make_direction_set",
    "make_grid",
    "even_part",
    "integrate",
    "inner",
    "write_sinogram",
    "read_sinogram",
    "write_sinogram_csv",
]

SINO_MAGIC = b"SINO"


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return 2.0 * pi ** (d / 2.0) / gamma(d / 2.0)


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Unit directions with quadrature weights and an antipode map.

    Attributes
    ----------
    d : int
        Ambient dimension.
    dirs : ndarray, shape (n, d)
    weights : ndarray, shape (n,)
        Surface-measure quadrature weights.
    antipode : ndarray of int, shape (n,)
        ``dirs[antipode[j]] == -dirs[j]``; an involution.
    """

    d: int
    dirs: np.ndarray
    weights: np.ndarray
    antipode: np.ndarray

    def __post_init__(self):
        dirs = np.array(self.dirs, dtype=np.float64, copy=True)
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        antipode = np.array(self.antipode, dtype=np.int64, copy=True)
        if dirs.ndim != 2 or dirs.shape[1] != self.d:
            raise ValueError(f"dirs must have shape (n, {self.d})")
        n = dirs.shape[0]
        if weights.shape != (n,) or antipode.shape != (n,):
            raise ValueError("weights and antipode must have one entry per direction")
        if np.any(np.abs(np.linalg.norm(dirs, axis=1) - 1.0) > 1e-12):
            raise ValueError("directions must be unit vectors")
        if np.any(weights <= 0):
            raise ValueError("direction weights must be positive")
        if np.any(antipode < 0) or np.any(antipode >= n) or np.any(antipode[antipode] != np.arange(n)):
            raise ValueError("antipode map must be an involution")
        for arr in (dirs, weights, antipode):
            arr.setflags(write=False)
        object.__setattr__(self, "dirs", dirs)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "antipode", antipode)

    @property
    def n(self) -> int:
        return self.dirs.shape[0]

    @property
    def mismatch(self) -> float:
        """Largest ``||xi_antipode(j) + xi_j||``."""
        return float(np.max(np.linalg.norm(self.dirs[self.antipode] + self.dirs, axis=1)))

    def angles(self) -> np.ndarray:
        """Polar angles in [0, 2pi) (d=2 only)."""
        if self.d != 2:
            raise ValueError("angles are defined for d=2 only")
        return np.mod(np.arctan2(self.dirs[:, 1], self.dirs[:, 0]), 2 * pi)

    def find(self, xi, tol: float = 1e-9) -> int | None:
        """Index of the direction within ``tol`` of ``xi``, else None."""
        dist = np.linalg.norm(self.dirs - np.asarray(xi, dtype=np.float64), axis=1)
        j = int(np.argmin(dist))
        return j if dist[j] <= tol else None

    def nearest(self, xi) -> int:
        return int(np.argmin(np.linalg.norm(self.dirs - np.asarray(xi, dtype=np.float64), axis=1)))


def _fibonacci_hemisphere(m: int) -> np.ndarray:
    # Fibonacci spiral restricted to z > 0 (z uniform in area on (0, 1)).
    k = np.arange(m) + 0.5
    z = 1.0 - k / m
    phi = pi * (3.0 - np.sqrt(5.0)) * np.arange(m)
    r = np.sqrt(1.0 - z * z)
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def make_direction_set(d: int, n: int) -> DirectionSet:
    """Equal-weight direction set on S^(d-1).

    For ``d=2`` the directions are ``(cos 2pi j/n, sin 2pi j/n)``; the second
    half is stored as the exact negation of the first so the antipode
    ``j + n/2`` is exact in floating point.  For ``d=3`` a Fibonacci spiral on
    the upper hemisphere is mirrored through the origin, which gives an exact
    antipode involution.
    """
    if d not in (2, 3):
        raise ValueError(f"d must be 2 or 3, got {d}")
    if n < 4:
        raise ValueError("need at least 4 directions")
    if n % 2:
        raise ValueError("number of directions must be even")
    m = n // 2
    if d == 2:
        theta = 2.0 * pi * np.arange(m) / n
        half = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        half = _fibonacci_hemisphere(m)
    dirs = np.vstack([half, -half])
    antipode = (np.arange(n) + m) % n
    weights = np.full(n, sphere_area(d) / n)
    return DirectionSet(d, dirs, weights, antipode)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Symmetric offsets ``t_i = h (i - (n_t - 1)/2)`` with odd ``n_t``."""

    t_max: float
    n_t: int

    def __post_init__(self):
        if self.n_t < 3 or self.n_t % 2 == 0:
            raise ValueError("n_t must be odd and at least 3")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.t_max / (self.n_t - 1)

    @property
    def t(self) -> np.ndarray:
        # integer offsets keep t_i = -t_{n-1-i} and t_mid = 0 exact
        return self.h * (np.arange(self.n_t) - (self.n_t - 1) // 2).astype(np.float64)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_t, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    """Product grid of offsets and directions."""

    radial: RadialGrid
    directions: DirectionSet

    @property
    def d(self) -> int:
        return self.directions.d

    @property
    def shape(self) -> tuple[int, int]:
        return (self.radial.n_t, self.directions.n)

    @property
    def t(self) -> np.ndarray:
        return self.radial.t

    @property
    def weights(self) -> np.ndarray:
        """Outer product of trapezoid and direction weights."""
        return np.outer(self.radial.weights, self.directions.weights)

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(t, xi)`` with broadcasting arrays ``t`` (n_t, 1) and ``xi`` (1, n_dirs, d)."""
        t = self.t[:, None]
        xi = self.directions.dirs[None, :, :]
        return np.asarray(func(t, xi), dtype=np.float64) * np.ones(self.shape)


def make_grid(d: int, n_dirs: int, n_t: int, t_max: float) -> SphericalGrid:
    return SphericalGrid(RadialGrid(t_max, n_t), make_direction_set(d, n_dirs))


@dataclass(frozen=True, eq=False)
class Sinogram:
    """Samples ``values[i, j] = g(t_i, xi_j)``.

    ``kind`` is ``"function"`` for pointwise samples and ``"measure"`` for a
    quadrature density (angular Diracs scaled by ``1/w_j``).
    """

    grid: SphericalGrid
    values: np.ndarray
    kind: str = field(default="function")

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("sinogram values must be finite")
        if self.kind not in ("function", "measure"):
            raise ValueError("kind must be 'function' or 'measure'")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values, kind: str | None = None) -> "Sinogram":
        return Sinogram(self.grid, values, self.kind if kind is None else kind)

    def reflected(self) -> np.ndarray:
        """Array of ``g(-t_i, -xi_j)``."""
        return self.values[::-1, :][:, self.grid.directions.antipode]

    @classmethod
    def from_function(cls, grid: SphericalGrid, func, kind: str = "function") -> "Sinogram":
        return cls(grid, grid.sample(func), kind)


def even_part(g: Sinogram) -> Sinogram:
    """``(g(t, xi) + g(-t, -xi)) / 2``."""
    return g.with_values(0.5 * (g.values + g.reflected()))


def integrate(g: Sinogram) -> float:
    """Trapezoid rule in t times the direction quadrature."""
    return float(g.grid.radial.weights @ g.values @ g.grid.directions.weights)


def inner(g: Sinogram, h: Sinogram) -> float:
    """Quadrature inner product of two sinograms on the same grid."""
    if g.grid is not h.grid and g.values.shape != h.values.shape:
        raise ValueError("sinograms live on different grids")
    return float(np.sum(g.grid.weights * g.values * h.values))


def write_sinogram(path, g: Sinogram) -> None:
    """Binary format: magic, <u32 d, n_dirs, n_t>, <f64 t_max>, dirs, weights, values (t fastest)."""
    grid = g.grid
    with open(path, "wb") as fh:
        fh.write(SINO_MAGIC)
        fh.write(struct.pack("<3I", grid.d, grid.directions.n, grid.radial.n_t))
        fh.write(struct.pack("<d", grid.radial.t_max))
        fh.write(np.ascontiguousarray(grid.directions.dirs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(grid.directions.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(g.values.T, dtype="<f8").tobytes())


def read_sinogram(path, kind: str = "function") -> Sinogram:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != SINO_MAGIC:
        raise ValueError("not a sinogram file (bad magic)")
    d, n_dirs, n_t = struct.unpack_from("<3I", data, 4)
    (t_max,) = struct.unpack_from("<d", data, 16)
    off = 24
    expected = off + 8 * (n_dirs * d + n_dirs + n_t * n_dirs)
    if len(data) != expected:
        raise ValueError(f"sinogram file has {len(data)} bytes, expected {expected}")
    dirs = np.frombuffer(data, "<f8", n_dirs * d, off).reshape(n_dirs, d)
    off += 8 * n_dirs * d
    weights = np.frombuffer(data, "<f8", n_dirs, off)
    off += 8 * n_dirs
    values = np.frombuffer(data, "<f8", n_t * n_dirs, off).reshape(n_dirs, n_t).T
    # recover the antipode map from the stored directions
    neg = -dirs
    antipode = np.array([int(np.argmin(np.linalg.norm(dirs - v, axis=1))) for v in neg])
    directions = DirectionSet(d, dirs, weights, antipode)
    return Sinogram(SphericalGrid(RadialGrid(t_max, n_t), directions), values, kind)


def write_sinogram_csv(path, g: Sinogram) -> None:
    """One row per sample: t, then theta (d=2) or xi components, then value."""
    grid = g.grid
    d = grid.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if d == 2:
            w.writerow(["t", "theta", "value"])
            ang = grid.directions.angles()
            for j in range(grid.directions.n):
                for i, t in enumerate(grid.t):
                    w.writerow([repr(float(t)), repr(float(ang[j])), repr(float(g.values[i, j]))])
        else:
            w.writerow(["t"] + [f"xi{q + 1}" for q in range(d)] + ["value"])
            for j, xi in enumerate(grid.directions.dirs):
                for i, t in enumerate(grid.t):
                    w.writerow([repr(float(t))] + [repr(float(v)) for v in xi] + [repr(float(g.values[i, j]))])
