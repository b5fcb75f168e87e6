"""Isotropic window, dual polynomial basis, projector onto P_n0, moment tests.

The window ``kappa`` has radial spectrum ``khat = rect * bump``: equal to 1
on ``|w| <= R0 - width/2``, 0 beyond ``R0 + width/2``.  Its derivatives give
the dual basis ``m*_k = (-1)^|k| d^k kappa``, biorthogonal to the Taylor
monomials ``m_k(x) = x^k / k!``.

Radial tables.  With ``nu = d/2 - 1`` and ``B_mu(z) = J_mu(z) / z^mu``::

    F_n(r) = (2pi)^(-d/2) int khat(rho) rho^(d-1+2n) B_(nu+n)(rho r) drho

``kappa = F_0`` and ``(1/r) d/dr F_n = -F_(n+1)``, so every derivative of
``kappa`` is a polynomial in ``x`` times some ``F_n``::

    d_i kappa       = -F_1 x_i
    d_i d_j kappa   = -F_1 delta_ij + F_2 x_i x_j

Pairings ``<f, m*_k>`` are lattice sums against a separable flat-top window
``W(x) = prod_i w(x_i)``, ``w = 1[-L0, L0] * Gaussian(L1)``.  The window's
spectrum has negligible mass outside ``|w| < 0.2`` and all its derivatives
vanish at 0, so the pairing is exact for polynomials and, because ``m*_k``
is band-limited, converges exponentially for functions whose spectrum is
smooth away from the origin (ridges included), far beyond what plain
truncation of the slowly decaying ``kappa`` tails achieves.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial, pi

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .grid import Sinogram
from .radon import _gl_panels, bessel_ratios

__all__ = [
    "IsotropicWindow",
    "make_iso_window",
    "multi_indices",
    "dual_basis_eval",
    "PairingQuadrature",
    "biorthogonality_matrix",
    "PolyCoeffs",
    "project_poly",
    "ridge_pairing",
    "moments",
    "RangeReport",
    "range_check",
]


class IsotropicWindow:
    """Band-limited isotropic window with flat spectrum near the origin.

    Parameters
    ----------
    d : int
        Dimension.
    R0 : float
        Half-width of the rectangle in the spectrum.
    width : float
        Support length of the mollifying bump.
    n0_max : int
        Highest derivative order tabulated.
    """

    def __init__(self, d: int = 2, R0: float = 0.5, width: float = 0.5, n0_max: int = 2):
        if d < 2:
            raise ValueError("d must be at least 2")
        if not (0 < R0 <= 0.5):
            raise ValueError("R0 must lie in (0, 1/2]")
        if not (0 < width <= 2 * R0):
            raise ValueError("mollifier width must lie in (0, 2 R0]")
        if R0 + 0.5 * width > 1.0 + 1e-15:
            raise ValueError("R0 + width/2 must not exceed 1")
        if n0_max < 0 or n0_max > 3:
            raise ValueError("n0_max must lie in 0..3")
        self.d = d
        self.R0 = float(R0)
        self.width = float(width)
        self.n0_max = int(n0_max)
        self.flat_edge = self.R0 - 0.5 * self.width
        self.cutoff = self.R0 + 0.5 * self.width
        xg, wg = np.polynomial.legendre.leggauss(60)
        self._xg, self._wg = xg, wg
        self._bump_mass = float(self._bump(xg) @ wg)
        self.r_max = 0.0
        self._tables: list[CubicSpline] = []

    @staticmethod
    def _bump(u):
        u = np.asarray(u, dtype=np.float64)
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
        return out

    def _bump_cdf(self, u):
        # integral of the unit-mass bump on [-1, u]
        u = np.clip(np.asarray(u, dtype=np.float64), -1.0, 1.0)
        a = 0.5 * (u + 1.0)
        nodes = -1.0 + a[..., None] * (self._xg + 1.0)
        return a * (self._bump(nodes) @ self._wg) / self._bump_mass

    def khat(self, omega) -> np.ndarray:
        """Radial spectrum ``khat(|w|)``."""
        om = np.abs(np.asarray(omega, dtype=np.float64))
        out = np.zeros_like(om)
        out[om <= self.flat_edge] = 1.0
        mid = (om > self.flat_edge) & (om < self.cutoff)
        hw = 0.5 * self.width
        w = om[mid]
        out[mid] = self._bump_cdf((w + self.R0) / hw) - self._bump_cdf((w - self.R0) / hw)
        return out

    def _nodes(self, r_max: float):
        width = min(0.05, 5.0 / max(r_max, 1.0))
        brk = [self.flat_edge] if self.flat_edge > 0 else []
        return _gl_panels(0.0, self.cutoff, width, breaks=brk)

    def kappa_rad(self, s) -> np.ndarray:
        """1D restriction ``(1/pi) int_0^inf khat(w) cos(w s) dw`` (the line profile)."""
        s = np.asarray(s, dtype=np.float64)
        nodes, weights = self._nodes(float(np.max(np.abs(s), initial=1.0)))
        wk = weights * self.khat(nodes)
        flat = s.ravel()
        out = np.empty(flat.shape)
        for k in range(0, flat.size, 4096):
            out[k:k + 4096] = np.cos(np.outer(flat[k:k + 4096], nodes)) @ wk / pi
        return out.reshape(s.shape)

    def ensure(self, r_max: float) -> None:
        """Tabulate ``F_0 .. F_n0max`` on ``[0, r_max]`` (no-op if already covered)."""
        if self._tables and r_max <= self.r_max:
            return
        r_max = float(np.ceil(max(r_max, 2 * self.r_max, 100.0)))
        # fine steps where the tables carry most of their mass
        r = np.concatenate([0.02 * np.arange(5000), 100.0 + 0.1 * np.arange(int(round((r_max - 100.0) / 0.1)) + 1)])
        nodes, weights = self._nodes(r_max)
        wk = weights * self.khat(nodes)
        keep = wk != 0.0
        nodes, wk = nodes[keep], wk[keep]
        nu = 0.5 * self.d - 1.0
        pref = (2.0 * pi) ** (-0.5 * self.d)
        n_tab = self.n0_max + 1
        coefs = [wk * nodes ** (self.d - 1 + 2 * n) for n in range(n_tab)]
        vals = np.empty((n_tab, r.size))
        for k in range(0, r.size, 256):
            ratios = bessel_ratios(nu, self.n0_max, np.outer(r[k:k + 256], nodes))
            for n in range(n_tab):
                vals[n, k:k + 256] = ratios[n] @ coefs[n]
        tables = [CubicSpline(r, pref * v) for v in vals]
        self._tables = tables
        self.r_max = float(r[-1])

    def radial(self, n: int, r) -> np.ndarray:
        """``F_n(r)``; the tables grow on demand (see :meth:`ensure`)."""
        if n > self.n0_max:
            raise ValueError(f"order {n} exceeds n0_max = {self.n0_max}")
        r = np.asarray(r, dtype=np.float64)
        self.ensure(float(np.max(r, initial=0.0)))
        return self._tables[n](r)

    def kappa(self, x) -> np.ndarray:
        """``kappa(x)`` for points of shape (..., d)."""
        return dual_basis_eval(self, (0,) * self.d, x)


@lru_cache(maxsize=8)
def make_iso_window(d: int = 2, R0: float = 0.5, mollifier_width: float = 0.5, n0_max: int = 2) -> IsotropicWindow:
    """Shared (cached) window instance."""
    return IsotropicWindow(d, R0, mollifier_width, n0_max)


def multi_indices(d: int, n0: int) -> list[tuple[int, ...]]:
    """Multi-indices with ``|k| <= n0`` in graded order, e.g. (0,0),(1,0),(0,1),(2,0),(1,1),(0,2)."""
    out = []
    for deg in range(n0 + 1):
        level = [k for k in itertools.product(range(deg + 1), repeat=d) if sum(k) == deg]
        out.extend(sorted(level, reverse=True))
    return out


def monomial(k, x) -> np.ndarray:
    """Taylor monomial ``x^k / k!``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.ones(x.shape[:-1])
    for i, ki in enumerate(k):
        if ki:
            out = out * x[..., i] ** ki / factorial(ki)
    return out


def dual_basis_eval(win: IsotropicWindow, k, pts) -> np.ndarray:
    """``m*_k(x) = (-1)^|k| d^k kappa(x)`` via the radial tables.

    Supports ``|k| <= min(n0_max, 3)``.
    """
    k = tuple(int(v) for v in k)
    if len(k) != win.d:
        raise ValueError("multi-index length must equal the dimension")
    order = sum(k)
    if order > win.n0_max:
        raise ValueError(f"|k| = {order} exceeds the window's n0_max = {win.n0_max}")
    x = np.asarray(pts, dtype=np.float64)
    r = np.sqrt(np.sum(x * x, axis=-1))
    if order == 0:
        return win.radial(0, r)
    idx = [i for i, ki in enumerate(k) for _ in range(ki)]
    if order == 1:
        # -d_i kappa = F_1 x_i
        return win.radial(1, r) * x[..., idx[0]]
    if order == 2:
        i, j = idx
        return win.radial(2, r) * x[..., i] * x[..., j] - (win.radial(1, r) if i == j else 0.0)
    i, j, m = idx
    # -d_i d_j d_m kappa = F_3 x_i x_j x_m - F_2 (delta_ij x_m + delta_im x_j + delta_jm x_i)
    f2 = win.radial(2, r)
    out = win.radial(3, r) * x[..., i] * x[..., j] * x[..., m]
    for a, b, c in ((i, j, m), (i, m, j), (j, m, i)):
        if a == b:
            out = out - f2 * x[..., c]
    return out


def flat_top(s, L0: float, L1: float) -> np.ndarray:
    """``1[-L0, L0]`` smoothed by a Gaussian of width ``L1``."""
    s = np.asarray(s, dtype=np.float64)
    c = np.sqrt(2.0) * L1
    return 0.5 * (special.erf((s + L0) / c) - special.erf((s - L0) / c))


@dataclass(frozen=True)
class PairingQuadrature:
    """Lattice parameters for ``<f, m*_k>``.

    ``L0``/``L1`` set the flat-top window, ``h`` the Cartesian lattice step.
    The lattice stops where the window drops below 1e-16.
    """

    L0: float = 280.0
    L1: float = 40.0
    h: float = 1.0

    @property
    def extent(self) -> float:
        return self.L0 + 8.3 * self.L1

    def axis(self) -> np.ndarray:
        m = int(np.ceil(self.extent / self.h))
        return self.h * np.arange(-m, m + 1, dtype=np.float64)


@lru_cache(maxsize=16)
def _lattice_duals(win: IsotropicWindow, quad: PairingQuadrature, ks: tuple):
    x = quad.axis()
    win.ensure(np.sqrt(win.d) * x[-1] + 1.0)
    w1 = flat_top(x, quad.L0, quad.L1)
    grids = np.meshgrid(*([x] * win.d), indexing="ij")
    pts = np.stack(grids, axis=-1)
    wts = quad.h**win.d
    for a in range(win.d):
        shape = [1] * win.d
        shape[a] = -1
        wts = wts * w1.reshape(shape)
    duals = np.stack([dual_basis_eval(win, k, pts) * wts for k in ks])
    return pts, duals


def biorthogonality_matrix(win: IsotropicWindow, n0: int, quad: PairingQuadrature | None = None) -> np.ndarray:
    """``G[k, n] = <m_k, m*_n>`` by windowed lattice quadrature (identity expected)."""
    if n0 > 2:
        raise ValueError("n0 must not exceed 2")
    if quad is None:
        quad = PairingQuadrature(h=2.0)
    ks = tuple(multi_indices(win.d, n0))
    pts, duals = _lattice_duals(win, quad, ks)
    G = np.empty((len(ks), len(ks)))
    for a, k in enumerate(ks):
        mk = monomial(k, pts)
        for b in range(len(ks)):
            G[a, b] = float(np.sum(mk * duals[b]))
    return G


@dataclass
class PolyCoeffs:
    """Polynomial ``sum_k b_k x^k / k!`` with ``|k| <= n0``."""

    n0: int
    d: int
    coeffs: np.ndarray
    indices: list = field(default_factory=list)

    def __post_init__(self):
        if not self.indices:
            self.indices = multi_indices(self.d, self.n0)
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (len(self.indices),):
            raise ValueError("coefficient count does not match the multi-index set")

    def __getitem__(self, k) -> float:
        return float(self.coeffs[self.indices.index(tuple(k))])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return sum(b * monomial(k, x) for b, k in zip(self.coeffs, self.indices))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def affine(self) -> tuple[float, np.ndarray]:
        """``(b, bvec)`` of the degree <= 1 part."""
        b = self[(0,) * self.d]
        bvec = np.array([self[tuple(int(i == j) for j in range(self.d))] for i in range(self.d)])
        return b, bvec

    def to_json(self) -> str:
        entries = [{"k": list(k), "b": float(b)} for k, b in zip(self.indices, self.coeffs)]
        return json.dumps({"n0": self.n0, "entries": entries})

    @classmethod
    def from_json(cls, text: str) -> "PolyCoeffs":
        data = json.loads(text)
        idx = [tuple(e["k"]) for e in data["entries"]]
        return cls(int(data["n0"]), len(idx[0]), [e["b"] for e in data["entries"]], idx)


def ridge_pairing(profile, xi, tau: float, win: IsotropicWindow, ks, breakpoints=(0.0,),
                  quad: PairingQuadrature | None = None, h_u: float = 2.0,
                  panel: float = 4.0, order: int = 8) -> np.ndarray:
    """``<r(xi . x - tau), m*_k>`` for each ``k`` on a lattice aligned with ``xi``.

    The lattice uses coordinates ``x = s xi + u xi_perp``.  Along ``s`` it is a
    composite Gauss-Legendre rule whose panels start at every profile
    breakpoint (kinks and jumps sit on panel edges); along ``u`` the integrand
    is band-limited, so the plain lattice sum with step ``h_u`` is exact up to
    the window.  The window is the flat-top product in ``(s, u)``.
    """
    if win.d != 2:
        raise ValueError("ridge-aligned pairing is implemented for d=2")
    if quad is None:
        quad = PairingQuadrature()
    xi = np.asarray(xi, dtype=np.float64)
    xi = xi / np.linalg.norm(xi)
    perp = np.array([-xi[1], xi[0]])
    ext = quad.extent
    brk = [tau + float(b) for b in breakpoints if -ext < tau + float(b) < ext]
    s, ws = _gl_panels(-ext, ext, panel, order=order, breaks=brk)
    m = int(np.ceil(ext / h_u))
    u = h_u * np.arange(-m, m + 1, dtype=np.float64)
    wu = h_u * flat_top(u, quad.L0, quad.L1)
    win.ensure(np.sqrt(2.0) * ext + 1.0)
    prof = np.asarray(profile(s - tau), dtype=np.float64) * ws * flat_top(s, quad.L0, quad.L1)
    out = np.zeros(len(ks))
    for start in range(0, s.size, 256):
        ss = s[start:start + 256]
        pts = ss[:, None, None] * xi + u[None, :, None] * perp
        for a, k in enumerate(ks):
            inner = dual_basis_eval(win, k, pts) @ wu
            out[a] += prof[start:start + 256] @ inner
    return out


def _ridge_terms(f):
    if hasattr(f, "ridge_decomposition"):
        return f.ridge_decomposition()
    return None


def project_poly(f, win: IsotropicWindow, n0: int = 1, quad: PairingQuadrature | None = None,
                 tail_warn: float = 1e-8, tail_error: float = 1e-4) -> PolyCoeffs:
    """Coefficients ``b_k = <f, m*_k>`` of ``Proj_{P_n0} f``.

    Objects exposing ``ridge_decomposition() -> (b, bvec, terms)`` with terms
    ``(weight, profile, xi, tau, breakpoints)`` are paired ridge by ridge on
    kink-aligned lattices; the affine part is projected exactly (the
    projector reproduces P_1).  Any other callable ``f(pts)`` (pts of shape
    (..., d)) is paired on the Cartesian lattice of ``quad``.
    """
    if n0 > win.n0_max:
        raise ValueError("n0 exceeds the window's tabulated order")
    ks = tuple(multi_indices(win.d, n0))
    if quad is None:
        quad = PairingQuadrature()
    terms = _ridge_terms(f)
    if terms is not None:
        b0, bvec, ridges = terms
        out = np.zeros(len(ks))
        for a, k in enumerate(ks):
            if sum(k) == 0:
                out[a] = b0
            elif sum(k) == 1:
                out[a] = float(np.asarray(bvec)[k.index(1)])
        for weight, profile, xi, tau, brk in ridges:
            out += weight * ridge_pairing(profile, xi, tau, win, ks, brk, quad)
        return PolyCoeffs(n0, win.d, out, list(ks))
    pts, duals = _lattice_duals(win, quad, ks)
    vals = np.asarray(f(pts), dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ValueError("f returned non-finite values on the quadrature lattice")
    prods = vals[None] * duals
    coeffs = prods.reshape(len(ks), -1).sum(axis=1)
    # mass near the lattice boundary, where the window has not yet decayed
    edge = np.max(np.abs(pts), axis=-1) > quad.L0 + 6.0 * quad.L1
    bulk = np.abs(prods).reshape(len(ks), -1).sum(axis=1)
    tail = np.abs(prods[:, edge]).sum(axis=1)
    ratio = float(np.max(tail / np.maximum(bulk, 1e-300)))
    if ratio > tail_error:
        raise ValueError(f"quadrature tail mass {ratio:.2e} exceeds {tail_error:g}; f grows too fast")
    if ratio > tail_warn:
        warnings.warn(f"quadrature tail mass {ratio:.2e} exceeds {tail_warn:g}", RuntimeWarning)
    return PolyCoeffs(n0, win.d, coeffs, list(ks))


def moments(g: Sinogram, k: int, tail_tol: float = 1e-6) -> np.ndarray:
    """``Phi_k(xi_j) = int t^k g(t, xi_j) dt`` by the trapezoid rule."""
    t = g.grid.t
    edge = np.max(np.abs(g.values[[0, -1], :]))
    scale = np.max(np.abs(g.values))
    if scale > 0 and edge > tail_tol * scale:
        warnings.warn(f"sinogram does not decay inside the t range (edge/peak = {edge / scale:.2e})", RuntimeWarning)
    return (g.grid.radial.weights * t**k) @ g.values


@dataclass
class RangeReport:
    """Evenness and moment-fit residuals of a sinogram.

    ``moment_residuals[k]`` is the array ``Phi_k(theta_j) - fit_j`` and
    ``moment_max[k]`` its largest absolute entry.
    """

    evenness: float
    moment_residuals: dict
    moment_max: dict
    tol_even: float
    tol_moment: float

    @property
    def even_pass(self) -> bool:
        return self.evenness <= self.tol_even

    @property
    def moment_pass(self) -> dict:
        return {k: v <= self.tol_moment for k, v in self.moment_max.items()}

    @property
    def passed(self) -> bool:
        return self.even_pass and all(self.moment_pass.values())

    def to_json(self) -> str:
        return json.dumps({
            "evenness": self.evenness,
            "tol_even": self.tol_even,
            "tol_moment": self.tol_moment,
            "even_pass": self.even_pass,
            "moments": [
                {"k": int(k), "max_residual": float(self.moment_max[k]), "pass": bool(self.moment_pass[k]),
                 "residuals": [float(v) for v in self.moment_residuals[k]]}
                for k in sorted(self.moment_max)
            ],
            "passed": self.passed,
        })


def range_check(g: Sinogram, k_max: int = 3, tol_even: float = 1e-12, tol_moment: float = 1e-6) -> RangeReport:
    """Check evenness and that ``Phi_k`` is a degree-k homogeneous polynomial in xi (d=2)."""
    if g.grid.d != 2:
        raise ValueError("range_check fits trigonometric monomials and needs d=2")
    # sup-norm of the odd part
    evenness = float(np.max(np.abs(0.5 * (g.values - g.reflected()))))
    theta = g.grid.directions.angles()
    res, mx = {}, {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(k_max + 1):
            phi = moments(g, k)
            A = np.column_stack([np.cos(theta) ** a * np.sin(theta) ** (k - a) for a in range(k + 1)])
            coef, *_ = np.linalg.lstsq(A, phi, rcond=None)
            r = phi - A @ coef
            res[k] = r
            mx[k] = float(np.max(np.abs(r)))
    return RangeReport(evenness, res, mx, tol_even, tol_moment)
