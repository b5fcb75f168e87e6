"""Ridge functions, ridge measures, the pseudoinverse kernel and ReLU networks.

Kernel of the pseudoinverse (closed form)::

    h(x; t, xi) = |t - xi.x|/2 - c0(t) + (xi.x) c1(t)
    c0 = kappa_rad * |.|/2,   c1 = kappa_rad * sign/2

``h`` is ``|xi.x - t|/2`` minus its projection onto affine functions, so
``h(x; z) = h(x; -z)`` and ``h`` is bounded in ``t`` for fixed ``x``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from math import pi

import numpy as np
from scipy.special import sici

from .grid import Sinogram, SphericalGrid
from .poly import IsotropicWindow, PairingQuadrature, make_iso_window, multi_indices, project_poly, ridge_pairing
from .radon import DiracAtomList, EuclideanField, _canonical_sign, _gl_panels, radon_lines

__all__ = [
    "Profile",
    "relu",
    "half_abs",
    "half_sign",
    "gaussian",
    "tabulated",
    "Ridge",
    "RidgeAtom",
    "ReLUNetwork",
    "MollifiedCorrections",
    "make_corrections",
    "eval_ridge",
    "ridge_identity_check",
    "ridge_filtered_radon",
    "kernel_h",
    "kernel_h_oracle",
    "ridge_duals",
    "pseudoinverse_apply",
    "extreme_point",
    "network_to_measure",
]


@dataclass(frozen=True, eq=False)
class Profile:
    """1D profile ``t -> r(t)``.

    ``breakpoints`` lists where ``r`` is not smooth (quadratures split there).
    Tabulated profiles interpolate linearly and vanish outside their table.
    """

    tag: str
    t: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.tag not in ("relu", "half_abs", "half_sign", "gaussian", "tabulated"):
            raise ValueError(f"unknown profile tag {self.tag!r}")
        if self.tag == "tabulated":
            t = np.asarray(self.t, dtype=np.float64)
            v = np.asarray(self.values, dtype=np.float64)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2:
                raise ValueError("tabulated profile needs matching 1D t and value arrays")
            if np.any(np.diff(t) <= 0):
                raise ValueError("tabulated t must be increasing")
            if not np.all(np.isfinite(v)):
                raise ValueError("tabulated values must be finite")

    @property
    def breakpoints(self) -> tuple:
        if self.tag in ("relu", "half_abs", "half_sign"):
            return (0.0,)
        if self.tag == "tabulated":
            return (float(self.t[0]), float(self.t[-1]))
        return ()

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        if self.tag == "relu":
            return np.maximum(t, 0.0)
        if self.tag == "half_abs":
            return 0.5 * np.abs(t)
        if self.tag == "half_sign":
            return 0.5 * np.sign(t)
        if self.tag == "gaussian":
            return np.exp(-0.5 * t * t) / np.sqrt(2.0 * pi)
        return np.interp(t, np.asarray(self.t), np.asarray(self.values), left=0.0, right=0.0)


relu = Profile("relu")
half_abs = Profile("half_abs")
half_sign = Profile("half_sign")
gaussian = Profile("gaussian")


def tabulated(t, values) -> Profile:
    return Profile("tabulated", tuple(float(v) for v in t), tuple(float(v) for v in values))


def eval_ridge(r: Profile, xi0, tau: float, pts) -> np.ndarray:
    """``r(xi0 . x - tau)``."""
    xi0 = np.asarray(xi0, dtype=np.float64)
    if abs(np.linalg.norm(xi0) - 1.0) > 1e-12:
        raise ValueError("ridge direction must be a unit vector")
    return r(np.asarray(pts, dtype=np.float64) @ xi0 - tau)


@dataclass(frozen=True, eq=False)
class Ridge:
    """The function ``weight * r(xi . x - tau)``."""

    profile: Profile
    xi: np.ndarray
    tau: float = 0.0
    weight: float = 1.0

    def __call__(self, pts) -> np.ndarray:
        return self.weight * eval_ridge(self.profile, self.xi, self.tau, pts)

    def ridge_decomposition(self):
        d = np.asarray(self.xi).size
        return 0.0, np.zeros(d), [(self.weight, self.profile, np.asarray(self.xi, dtype=np.float64),
                                   float(self.tau), self.profile.breakpoints)]


def ridge_identity_check(r: Profile, xi0, phi: EuclideanField) -> float:
    """``|<r(xi0 . x), phi> - <r, R phi(., xi0)>| / (1 + |lhs|)``.

    The left side is a lattice sum over ``phi``'s lattice; the right side a
    trapezoid sum over line integrals spaced by the lattice step.
    """
    xi0 = np.asarray(xi0, dtype=np.float64)
    h = phi.h
    lhs = float(np.sum(r(phi.points() @ xi0) * phi.values) * h * h)
    m = int(np.ceil(np.sqrt(2.0) * phi.x_max / h))
    t = h * np.arange(-m, m + 1, dtype=np.float64)
    proj = radon_lines(phi, t, np.broadcast_to(xi0, (t.size, 2)))
    w = np.full(t.size, h)
    w[0] = w[-1] = 0.5 * h
    rhs = float(np.sum(w * r(t) * proj))
    return abs(lhs - rhs) / (1.0 + abs(lhs))


def ridge_filtered_radon(r: Profile, xi0, grid: SphericalGrid, snap: bool = False) -> Sinogram:
    """Filtered Radon transform ``(r(t) delta(xi - xi0) + r(-t) delta(xi + xi0)) / 2``.

    The angular Diracs become the columns of ``xi0`` and ``-xi0`` scaled by
    ``1 / w_j`` so the grid quadrature reproduces the measure.
    """
    dirs = grid.directions
    j = dirs.find(xi0)
    if j is None:
        if not snap:
            raise ValueError("direction is not on the grid (enable snap to use the nearest one)")
        j = dirs.nearest(xi0)
    jn = int(dirs.antipode[j])
    t = grid.t
    vals = np.zeros(grid.shape)
    vals[:, j] += 0.5 * r(t) / dirs.weights[j]
    vals[:, jn] += 0.5 * r(-t) / dirs.weights[jn]
    return Sinogram(grid, vals, "measure")


class MollifiedCorrections:
    """Tables of ``c0 = kappa_rad * |.|/2`` and ``c1 = kappa_rad * sign/2``.

    Both are computed spectrally from the window's radial spectrum without
    forming the singular symbols: with ``a = R0 - width/2`` (flat edge) and
    ``b = R0 + width/2`` (cutoff)::

        c1(t) = (1/pi) int_0^b khat(w) sin(w t)/w dw
        c0(t) = |t|/2 + (1/pi) int_a^inf (1 - khat(w)) cos(w t)/w^2 dw

    where the last integral on ``[b, inf)`` is closed form in terms of the
    sine integral.  Values are linearly interpolated on ``[0, t_max]`` and
    replaced by the asymptotes ``|t|/2`` and ``sign(t)/2`` beyond.
    """

    def __init__(self, win: IsotropicWindow, t_max: float = 200.0, dt: float = 0.002):
        self.win = win
        self.t_max = float(t_max)
        self.dt = float(dt)
        t = dt * np.arange(int(round(t_max / dt)) + 1)
        self.t = t
        width = min(0.02, 5.0 / t_max)
        n1, w1 = _gl_panels(0.0, win.cutoff, width, breaks=[win.flat_edge] if win.flat_edge > 0 else [])
        k1 = w1 * win.khat(n1) / n1
        a = max(win.flat_edge, 0.0)
        n0, w0 = _gl_panels(a, win.cutoff, width)
        k0 = w0 * (1.0 - win.khat(n0)) / n0**2
        c1 = np.empty_like(t)
        c0 = np.empty_like(t)
        for s in range(0, t.size, 2048):
            ts = t[s:s + 2048]
            c1[s:s + 2048] = np.sin(np.outer(ts, n1)) @ k1 / pi
            c0[s:s + 2048] = np.cos(np.outer(ts, n0)) @ k0 / pi
        b = win.cutoff
        si, _ = sici(b * t)
        c0 += (np.cos(b * t) / b - t * (0.5 * pi - si)) / pi
        c0 += 0.5 * t
        self.c0_table = c0
        self.c1_table = c1

    def c0(self, t) -> np.ndarray:
        a = np.abs(np.asarray(t, dtype=np.float64))
        return np.where(a <= self.t_max, np.interp(a, self.t, self.c0_table), 0.5 * a)

    def c1(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        a = np.abs(t)
        return np.sign(t) * np.where(a <= self.t_max, np.interp(a, self.t, self.c1_table), 0.5)


@lru_cache(maxsize=8)
def make_corrections(win: IsotropicWindow | None = None, t_max: float = 200.0, dt: float = 0.002) -> MollifiedCorrections:
    """Shared (cached) correction tables for ``win`` (default window if None)."""
    return MollifiedCorrections(make_iso_window() if win is None else win, t_max, dt)


def kernel_h(x, t, xi, corr: MollifiedCorrections) -> np.ndarray:
    """Closed-form kernel ``|t - xi.x|/2 - c0(t) + (xi.x) c1(t)`` (broadcasting)."""
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    s = np.sum(x * xi, axis=-1)
    return 0.5 * np.abs(t - s) - corr.c0(t) + s * corr.c1(t)


@lru_cache(maxsize=4096)
def _ridge_duals_cached(t: float, xi: tuple, win: IsotropicWindow, quad: PairingQuadrature) -> tuple:
    ks = tuple(multi_indices(win.d, 1))
    return tuple(ridge_pairing(half_abs, np.array(xi), t, win, ks, half_abs.breakpoints, quad))


def ridge_duals(t: float, xi, win: IsotropicWindow, quad: PairingQuadrature | None = None) -> np.ndarray:
    """``q_k(t, xi) = <|xi . x - t|/2, m*_k>`` for ``|k| <= 1`` by 2D lattice quadrature."""
    quad = PairingQuadrature() if quad is None else quad
    return np.array(_ridge_duals_cached(float(t), tuple(float(v) for v in xi), win, quad))


def kernel_h_oracle(x, t: float, xi, win: IsotropicWindow, quad: PairingQuadrature | None = None) -> np.ndarray:
    """Definitional kernel ``|xi.x - t|/2 - sum_{|k|<=1} m_k(x) q_k(t, xi)``."""
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    q = ridge_duals(t, xi, win, quad)
    return 0.5 * np.abs(x @ xi - t) - q[0] - x @ q[1:]


def pseudoinverse_apply(w, pts, corr: MollifiedCorrections | None = None, odd_tol: float = 1e-8) -> np.ndarray:
    """Apply the pseudoinverse integral operator with kernel ``h`` to ``w``.

    ``w`` is a :class:`DiracAtomList` (exact atom sum) or an even sinogram
    (quadrature sum with the grid weights).  Sinograms with an odd part above
    ``odd_tol`` are rejected; pass them through ``even_part`` first.
    """
    corr = make_corrections() if corr is None else corr
    pts = np.asarray(pts, dtype=np.float64)
    out = np.zeros(pts.shape[:-1])
    if isinstance(w, DiracAtomList):
        for a, t, xi in w:
            out += a * kernel_h(pts, t, xi, corr)
        return out
    if not isinstance(w, Sinogram):
        raise TypeError("w must be a DiracAtomList or a Sinogram")
    odd = 0.5 * (w.values - w.reflected())
    if np.max(np.abs(odd)) > odd_tol:
        raise ValueError(f"input has an odd component of size {np.max(np.abs(odd)):.3g}; apply even_part first")
    dens = w.values * w.grid.weights
    t = w.grid.t
    dirs = w.grid.directions.dirs
    for i, j in zip(*np.nonzero(dens)):
        out += dens[i, j] * kernel_h(pts, t[i], dirs[j], corr)
    return out


@dataclass(frozen=True)
class RidgeAtom:
    """``a * relu(xi . x - tau)``."""

    a: float
    xi: tuple
    tau: float

    def __post_init__(self):
        if abs(np.linalg.norm(self.xi) - 1.0) > 1e-12:
            raise ValueError("atom direction must be a unit vector")


def _fmt(x: float) -> str:
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("cannot serialize non-finite values")
    return format(x, ".17g")


class ReLUNetwork:
    """``f(x) = b + bvec . x + sum_k a_k relu(xi_k . x - tau_k)``.

    Atoms with the same ``(xi, tau)`` (to 1e-10) are merged; atoms whose
    merged weight is exactly zero are dropped.
    """

    def __init__(self, b: float, bvec, atoms=(), tol: float = 1e-10):
        self.b = float(b)
        self.bvec = np.array(bvec, dtype=np.float64).ravel()
        self.d = self.bvec.size
        merged: list[list] = []
        for atom in atoms:
            a, xi, tau = (atom.a, atom.xi, atom.tau) if isinstance(atom, RidgeAtom) else atom
            xi = np.asarray(xi, dtype=np.float64).ravel()
            if xi.size != self.d:
                raise ValueError("atom dimension does not match bvec")
            if abs(np.linalg.norm(xi) - 1.0) > 1e-12:
                raise ValueError("atom direction must be a unit vector")
            for m in merged:
                if abs(m[2] - tau) <= tol and np.max(np.abs(m[1] - xi)) <= tol:
                    m[0] += float(a)
                    break
            else:
                merged.append([float(a), xi, float(tau)])
        merged = [m for m in merged if m[0] != 0.0]
        self.a = np.array([m[0] for m in merged], dtype=np.float64)
        self.xi = np.array([m[1] for m in merged], dtype=np.float64).reshape(-1, self.d)
        self.tau = np.array([m[2] for m in merged], dtype=np.float64)

    @property
    def n_atoms(self) -> int:
        return self.a.size

    @property
    def atoms(self) -> list[RidgeAtom]:
        return [RidgeAtom(float(a), tuple(float(v) for v in xi), float(t)) for a, xi, t in zip(self.a, self.xi, self.tau)]

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        out = self.b + pts @ self.bvec
        if self.n_atoms:
            out = out + np.maximum(pts @ self.xi.T - self.tau, 0.0) @ self.a
        return out

    def ridge_decomposition(self):
        terms = [(a, relu, xi, t, relu.breakpoints) for a, xi, t in zip(self.a, self.xi, self.tau)]
        return self.b, self.bvec.copy(), terms

    def canonical(self) -> "ReLUNetwork":
        """Same function with every ``xi`` in the half-space of positive first nonzero component.

        Uses ``relu(-s) = relu(s) - s``.
        """
        b = self.b
        bvec = self.bvec.copy()
        atoms = []
        for a, xi, t in zip(self.a, self.xi, self.tau):
            if _canonical_sign(xi) < 0:
                atoms.append((a, -xi, -t))
                b -= a * t
                bvec += a * xi
            else:
                atoms.append((a, xi, t))
        return ReLUNetwork(b, bvec, atoms)

    def to_dict(self) -> dict:
        return {
            "b": self.b,
            "bvec": self.bvec.tolist(),
            "atoms": [{"a": float(a), "xi": xi.tolist(), "tau": float(t)} for a, xi, t in zip(self.a, self.xi, self.tau)],
        }

    def to_json(self) -> str:
        """JSON with every float written to 17 significant digits (bit-exact round trip)."""
        atoms = ", ".join(
            '{"a": %s, "xi": [%s], "tau": %s}' % (_fmt(a), ", ".join(_fmt(v) for v in xi), _fmt(t))
            for a, xi, t in zip(self.a, self.xi, self.tau)
        )
        return '{"b": %s, "bvec": [%s], "atoms": [%s]}' % (
            _fmt(self.b), ", ".join(_fmt(v) for v in self.bvec), atoms)

    @classmethod
    def from_dict(cls, data: dict) -> "ReLUNetwork":
        atoms = [(float(at["a"]), np.array(at["xi"], dtype=np.float64), float(at["tau"])) for at in data["atoms"]]
        return cls(float(data["b"]), data["bvec"], atoms)

    @classmethod
    def from_json(cls, text: str) -> "ReLUNetwork":
        return cls.from_dict(json.loads(text))


def network_to_measure(net: ReLUNetwork) -> DiracAtomList:
    """``Delta_R f = sum_k a_k e_(tau_k, xi_k)`` with antipodal atoms merged."""
    return DiracAtomList([(a, t, xi) for a, xi, t in zip(net.a, net.xi, net.tau)], d=net.d)


def extreme_point(t0: float, xi0, sign: int, win: IsotropicWindow | None = None,
                  quad: PairingQuadrature | None = None) -> ReLUNetwork:
    """``sign * (|xi0.x - t0|/2 - Proj_P1{|xi0.x - t0|/2})`` as a one-atom network.

    Written with ``|s|/2 = relu(s) - s/2``: atom ``(sign, xi0, t0)`` plus the
    affine part ``sign * (t0/2 - xi0.x/2 - p(x))`` where ``p`` is the
    projection computed by :func:`project_poly`.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    win = make_iso_window() if win is None else win
    xi0 = np.asarray(xi0, dtype=np.float64)
    if abs(np.linalg.norm(xi0) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    p = project_poly(Ridge(half_abs, xi0, float(t0)), win, 1, quad)
    pb, pvec = p.affine()
    b = sign * (0.5 * t0 - pb)
    bvec = sign * (-0.5 * xi0 - pvec)
    return ReLUNetwork(b, bvec, [(float(sign), xi0, float(t0))])
