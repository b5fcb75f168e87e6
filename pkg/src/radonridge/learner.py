"""Sparse ReLU-network regression with a total-variation penalty on ridges.

The continuous problem::

    min_f  sum_m (y_m - f(x_m))^2 + lam * ||Delta_R f||_M

is discretized on a finite dictionary of ridges ``relu(xi_p . x - tau_p)``.
With ``f = b + bvec . x + sum_p a_p relu(xi_p . x - tau_p)`` this becomes a
lasso in ``a`` with an unpenalized affine block.  The affine block is
eliminated exactly by projecting onto the orthogonal complement of the
affine columns, the reduced lasso is solved by FISTA or coordinate descent,
and the result is polished by an exact active-set solve so the KKT
conditions hold to rounding.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from math import pi

import numpy as np

from ._backend import lasso_cd
from .grid import make_direction_set
from .radon import _canonical_sign
from .ridge import ReLUNetwork, network_to_measure

__all__ = [
    "Dataset",
    "Dictionary",
    "FitConfig",
    "FitResult",
    "ConvergenceError",
    "build_dictionary",
    "design_matrix",
    "fit",
    "objective",
    "kkt_residual",
    "similarity_transform",
    "transform_dictionary",
    "InvarianceReport",
    "invariance_experiment",
    "lambda_sweep",
    "write_sweep_tsv",
]


class ConvergenceError(RuntimeError):
    """Raised when the solver hits ``max_iter`` before the KKT tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class Dataset:
    """Distinct points ``x_m`` (M, d) with targets ``y_m`` (M,)."""

    points: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.array(self.points, dtype=np.float64, copy=True)
        y = np.array(self.targets, dtype=np.float64, copy=True).ravel()
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError("points must have shape (M, d) with M >= 1")
        if y.shape != (x.shape[0],):
            raise ValueError("need one target per point")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("data must be finite")
        if x.shape[0] > 1:
            diff = x[:, None, :] - x[None, :, :]
            dist = np.sqrt(np.sum(diff * diff, axis=-1))
            np.fill_diagonal(dist, np.inf)
            if np.min(dist) <= 0.0:
                i, j = np.unravel_index(np.argmin(dist), dist.shape)
                raise ValueError(f"points {i} and {j} coincide")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "targets", y)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        """Read ``x1,...,xd,y`` with a header row; errors name the offending line."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        rows = [(n, r) for n, r in enumerate(rows, start=1) if any(c.strip() for c in r)]
        if not rows:
            raise ValueError(f"{path}: empty file")
        n_head, header = rows[0]
        header = [c.strip() for c in header]
        d = len(header) - 1
        if d < 1 or header != [f"x{i + 1}" for i in range(d)] + ["y"]:
            raise ValueError(f"{path}:{n_head}: header must be x1,...,xd,y")
        if len(rows) == 1:
            raise ValueError(f"{path}: no data rows")
        data = []
        for n, row in rows[1:]:
            if len(row) != d + 1:
                raise ValueError(f"{path}:{n}: expected {d + 1} fields, got {len(row)}")
            try:
                data.append([float(c) for c in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{n}: {exc}") from None
        arr = np.array(data)
        return cls(arr[:, :d], arr[:, d])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.d)] + ["y"])
            for x, y in zip(self.points, self.targets):
                w.writerow([repr(float(v)) for v in x] + [repr(float(y))])


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Candidate atoms ``relu(xi_p . x - tau_p)`` with provenance."""

    xi: np.ndarray
    tau: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        xi = np.array(self.xi, dtype=np.float64, copy=True)
        tau = np.array(self.tau, dtype=np.float64, copy=True).ravel()
        if xi.ndim != 2 or xi.shape[0] != tau.size:
            raise ValueError("xi must have shape (P, d) matching tau")
        if xi.shape[0] and np.max(np.abs(np.linalg.norm(xi, axis=1) - 1.0)) > 1e-12:
            raise ValueError("dictionary directions must be unit vectors")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "tau", tau)

    @property
    def size(self) -> int:
        return self.tau.size

    def with_atoms(self, xi, tau) -> "Dictionary":
        """Append atoms, skipping any that duplicate an existing one after canonicalization."""
        xs = [row for row in self.xi]
        ts = list(self.tau)
        keys = {_atom_key(x, t) for x, t in zip(xs, ts)}
        for x, t in zip(np.atleast_2d(np.asarray(xi, dtype=np.float64)), np.atleast_1d(tau)):
            x = x / np.linalg.norm(x)
            k = _atom_key(x, float(t))
            if k not in keys:
                keys.add(k)
                xs.append(x)
                ts.append(float(t))
        return Dictionary(np.array(xs).reshape(-1, self.xi.shape[1]), np.array(ts), dict(self.meta))


def _atom_key(xi, tau, digits: int = 10):
    sgn = _canonical_sign(np.asarray(xi))
    # relu(s) and relu(-s) are different functions, so the sign is part of the key
    return (sgn,) + tuple(np.round(sgn * np.asarray(xi), digits) + 0.0) + (round(sgn * float(tau), digits) + 0.0,)


def _canonical_directions(d: int, n_dirs: int) -> np.ndarray:
    if n_dirs < 2 or n_dirs % 2:
        raise ValueError("n_dirs must be even and at least 2")
    if d == 2:
        theta = 2.0 * pi * np.arange(n_dirs // 2) / n_dirs
        return np.column_stack([np.cos(theta), np.sin(theta)])
    dirs = make_direction_set(d, n_dirs).dirs
    return np.array([x for x in dirs if _canonical_sign(x) > 0])


def build_dictionary(data: Dataset, n_dirs: int, offsets_per_dir: int) -> Dictionary:
    """Directions from the canonical half-sphere, offsets at data-projection quantiles.

    Offsets are ``quantile(xi . x_m, q)`` for ``q`` evenly spaced in [0, 1],
    so they interpolate between consecutive projections.  Duplicates (for
    example when projections coincide) are dropped, so the size can be
    smaller than ``(n_dirs / 2) * offsets_per_dir``.
    """
    if offsets_per_dir < 2:
        raise ValueError("offsets_per_dir must be at least 2")
    dirs = _canonical_directions(data.d, n_dirs)
    levels = np.linspace(0.0, 1.0, offsets_per_dir)
    xs, ts, seen = [], [], set()
    for xi in dirs:
        for t in np.quantile(data.points @ xi, levels):
            key = _atom_key(xi, t)
            if key not in seen:
                seen.add(key)
                xs.append(xi)
                ts.append(float(t))
    meta = {"n_dirs": int(n_dirs), "offsets_per_dir": int(offsets_per_dir), "offset_policy": "quantile"}
    return Dictionary(np.array(xs).reshape(-1, data.d), np.array(ts), meta)


def design_matrix(points, dictionary: Dictionary) -> np.ndarray:
    """``Phi[m, p] = relu(xi_p . x_m - tau_p)``."""
    return np.maximum(np.asarray(points, dtype=np.float64) @ dictionary.xi.T - dictionary.tau, 0.0)


def _affine_block(points) -> np.ndarray:
    return np.column_stack([np.ones(len(points)), points])


@dataclass(frozen=True)
class FitConfig:
    """Solver settings; ``tol_kkt`` is an absolute bound on the KKT residual."""

    lam: float
    loss: str = "squared"
    solver: str = "fista"
    max_iter: int = 20000
    tol_kkt: float = 1e-8
    prune_threshold: float = 1e-8
    refine: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.tol_kkt > 0:
            raise ValueError("tol_kkt must be positive")
        if self.loss != "squared":
            raise ValueError("only the squared loss is supported")
        if self.solver not in ("fista", "coordinate_descent"):
            raise ValueError("solver must be 'fista' or 'coordinate_descent'")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class FitResult:
    network: ReLUNetwork
    objective: float
    data_loss: float
    reg_cost: float
    kkt_residual: float
    iterations: int
    k0: int
    lam: float
    solver: str
    rank_deficient: bool = False
    weights: np.ndarray | None = None

    def to_json(self) -> str:
        diag = {
            "objective": self.objective,
            "data_loss": self.data_loss,
            "reg_cost": self.reg_cost,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "K0": self.k0,
            "lambda": self.lam,
            "solver": self.solver,
            "rank_deficient": self.rank_deficient,
        }
        body = json.dumps(diag, sort_keys=True)
        return '{"network": %s, %s' % (self.network.to_json(), body[1:])


def objective(net: ReLUNetwork, data: Dataset, lam: float) -> tuple[float, float, float]:
    """``(data_loss + lam * reg_cost, data_loss, reg_cost)`` with ``reg_cost = ||Delta_R f||_M``."""
    r = data.targets - net(data.points)
    loss = float(r @ r)
    reg = network_to_measure(net).norm
    return loss + lam * reg, loss, reg


class _Reduced:
    """Lasso after eliminating the affine block: ``||yt - Pt a||^2 + lam |a|_1``."""

    def __init__(self, data: Dataset, dictionary: Dictionary):
        self.phi = design_matrix(data.points, dictionary)
        self.A = _affine_block(data.points)
        U, sv, _ = np.linalg.svd(self.A, full_matrices=False)
        tol = sv[0] * max(self.A.shape) * np.finfo(float).eps if sv.size else 0.0
        r = int(np.sum(sv > tol))
        self.rank_deficient = r < self.A.shape[1]
        Q = U[:, :r]
        self.y = data.targets
        self.pt = self.phi - Q @ (Q.T @ self.phi)
        self.yt = self.y - Q @ (Q.T @ self.y)
        self.gram = self.pt.T @ self.pt
        self.corr = self.pt.T @ self.yt

    def gradient(self, a: np.ndarray) -> np.ndarray:
        return -2.0 * (self.corr - self.gram @ a)

    def value(self, a: np.ndarray, lam: float) -> float:
        r = self.yt - self.pt @ a
        return float(r @ r) + lam * float(np.sum(np.abs(a)))

    def affine(self, a: np.ndarray) -> np.ndarray:
        # minimum-norm least squares; unique unless the affine block is rank deficient
        beta, *_ = np.linalg.lstsq(self.A, self.y - self.phi @ a, rcond=None)
        return beta


def kkt_residual(grad: np.ndarray, a: np.ndarray, lam: float) -> float:
    """``max_p`` of ``|g_p + lam sign a_p|`` (active) or ``max(0, |g_p| - lam)`` (inactive)."""
    if a.size == 0:
        return 0.0
    act = a != 0
    res = np.where(act, np.abs(grad + lam * np.sign(a)), np.maximum(0.0, np.abs(grad) - lam))
    return float(np.max(res))


def _polish(red: _Reduced, a: np.ndarray, lam: float, tol: float, max_rounds: int = 50) -> np.ndarray:
    """Exact solve on the support of ``a`` with its signs fixed, repaired greedily."""
    a = a.copy()
    support = np.flatnonzero(a)
    signs = np.sign(a[support])
    for _ in range(max_rounds):
        new = np.zeros_like(a)
        if support.size:
            G = red.gram[np.ix_(support, support)]
            rhs = red.corr[support] - 0.5 * lam * signs
            sol, *_ = np.linalg.lstsq(G, rhs, rcond=None)
            flipped = np.sign(sol) != signs
            if np.any(flipped):
                support = support[~flipped]
                signs = signs[~flipped]
                continue
            new[support] = sol
        g = red.gradient(new)
        viol = np.abs(g) - lam
        viol[support] = -np.inf
        worst = int(np.argmax(viol))
        if viol[worst] <= tol:
            return new
        support = np.append(support, worst)
        signs = np.append(signs, -np.sign(g[worst]))
    return new


def _fista(red: _Reduced, a: np.ndarray, lam: float, n_iter: int, state: dict) -> np.ndarray:
    L = state.setdefault("L", 2.0 * max(np.linalg.eigvalsh(red.gram)[-1], 1e-300))
    z = state.get("z", a.copy())
    tk = state.get("t", 1.0)
    for _ in range(n_iter):
        step = z - red.gradient(z) / L
        new = np.sign(step) * np.maximum(np.abs(step) - lam / L, 0.0)
        t1 = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        z = new + ((tk - 1.0) / t1) * (new - a)
        a, tk = new, t1
    state["z"], state["t"] = z, tk
    return a


def _solve(red: _Reduced, cfg: FitConfig, lam: float) -> tuple[np.ndarray, int, float]:
    P = red.gram.shape[0]
    a = np.zeros(P)
    if P == 0:
        return a, 0, 0.0
    chunk = 200 if cfg.solver == "fista" else 20
    state: dict = {}
    it = 0
    res = np.inf
    while it < cfg.max_iter:
        n = min(chunk, cfg.max_iter - it)
        if cfg.solver == "fista":
            a = _fista(red, a, lam, n, state)
        else:
            gram = np.ascontiguousarray(red.gram)
            corr = np.ascontiguousarray(red.corr)
            lasso_cd(gram, corr, a, lam, n, 0.0)
        it += n
        cand = _polish(red, a, lam, cfg.tol_kkt)
        res_c = kkt_residual(red.gradient(cand), cand, lam)
        res = kkt_residual(red.gradient(a), a, lam)
        if res_c <= cfg.tol_kkt and red.value(cand, lam) <= red.value(a, lam) + 1e-12 * (1.0 + red.value(a, lam)):
            return cand, it, res_c
        if res <= cfg.tol_kkt:
            return a, it, res
    raise ConvergenceError(
        f"{cfg.solver} did not reach KKT residual {cfg.tol_kkt:g} in {cfg.max_iter} iterations "
        f"(residual {res:.3e})", res, it)


def fit(data: Dataset, dictionary: Dictionary, cfg: FitConfig) -> FitResult:
    """Minimize ``sum_m (y_m - f(x_m))^2 + lam * sum_p |a_p|`` over the dictionary and P1."""
    if dictionary.size and dictionary.xi.shape[1] != data.d:
        raise ValueError("dictionary dimension does not match the data")
    if cfg.refine:
        dictionary = _refined_dictionary(data, dictionary, cfg)
    red = _Reduced(data, dictionary)
    a, iterations, _ = _solve(red, cfg, cfg.lam)
    if a.size and np.any(a):
        # prune tiny weights, then re-solve on the survivors with lam kept
        thr = cfg.prune_threshold * np.max(np.abs(a))
        a = np.where(np.abs(a) > thr, a, 0.0)
        a = _polish(red, a, cfg.lam, cfg.tol_kkt)
    res = kkt_residual(red.gradient(a), a, cfg.lam)
    beta = red.affine(a)
    resid = red.y - red.A @ beta - red.phi @ a
    res = max(res, float(np.max(np.abs(2.0 * red.A.T @ resid))))
    if res > cfg.tol_kkt:
        raise ConvergenceError(f"KKT residual {res:.3e} after pruning exceeds {cfg.tol_kkt:g}", res, iterations)
    act = np.flatnonzero(a)
    net = ReLUNetwork(beta[0], beta[1:], [(a[p], dictionary.xi[p], dictionary.tau[p]) for p in act])
    obj, loss, reg = objective(net, data, cfg.lam)
    return FitResult(net, obj, loss, reg, res, iterations, net.n_atoms, cfg.lam, cfg.solver,
                     red.rank_deficient, a)


def _refined_dictionary(data: Dataset, dictionary: Dictionary, cfg: FitConfig) -> Dictionary:
    # experimental: one pass that adds offsets halfway to the neighbouring offsets of active atoms
    base = fit(data, dictionary, FitConfig(**{**asdict(cfg), "refine": False}))
    new_xi, new_tau = [], []
    for p in np.flatnonzero(base.weights):
        same = np.flatnonzero(np.all(np.abs(dictionary.xi - dictionary.xi[p]) < 1e-12, axis=1))
        taus = np.sort(dictionary.tau[same])
        k = int(np.searchsorted(taus, dictionary.tau[p]))
        for q in (k - 1, k + 1):
            if 0 <= q < taus.size:
                new_xi.append(dictionary.xi[p])
                new_tau.append(0.5 * (taus[q] + dictionary.tau[p]))
    if not new_tau:
        return dictionary
    return dictionary.with_atoms(np.array(new_xi), np.array(new_tau))


def similarity_transform(net: ReLUNetwork, s: float, U, shift) -> ReLUNetwork:
    """Network ``g`` with ``g(x) = net(s U x - shift)``, atom by atom.

    ``a' = s a``, ``xi' = U^T xi``, ``tau' = (tau + xi . shift) / s``; the
    affine part becomes ``b - bvec . shift + (s U^T bvec) . x``.
    """
    if not s > 0:
        raise ValueError("scale s must be positive")
    U = np.asarray(U, dtype=np.float64)
    shift = np.asarray(shift, dtype=np.float64)
    if U.shape != (net.d, net.d) or np.max(np.abs(U.T @ U - np.eye(net.d))) > 1e-12:
        raise ValueError("U must be an orthogonal d x d matrix")
    atoms = []
    for a, xi, t in zip(net.a, net.xi, net.tau):
        xi2 = U.T @ xi
        xi2 = xi2 / np.linalg.norm(xi2)
        atoms.append((s * a, xi2, (t + xi @ shift) / s))
    return ReLUNetwork(net.b - net.bvec @ shift, s * (U.T @ net.bvec), atoms)


def transform_dictionary(dictionary: Dictionary, s: float, U, shift) -> Dictionary:
    """Atom-wise image of ``dictionary`` under ``relu(xi . x - tau) -> relu(xi . (s U x - shift) - tau)``."""
    U = np.asarray(U, dtype=np.float64)
    xi = dictionary.xi @ U
    xi = xi / np.linalg.norm(xi, axis=1, keepdims=True)
    tau = (dictionary.tau + dictionary.xi @ np.asarray(shift, dtype=np.float64)) / s
    return Dictionary(xi, tau, dict(dictionary.meta))


@dataclass
class InvarianceReport:
    objective: float
    objective_transformed: float
    transported_into_transformed: float
    transported_back: float
    reg_cost_ratio: float
    s: float

    @property
    def objective_gap(self) -> float:
        return abs(self.objective - self.objective_transformed)

    @property
    def transport_gap(self) -> float:
        """Largest gap between a transported optimum and the other problem's optimum."""
        return max(abs(self.transported_into_transformed - self.objective_transformed),
                   abs(self.transported_back - self.objective))

    def to_json(self) -> str:
        out = asdict(self)
        out["objective_gap"] = self.objective_gap
        out["transport_gap"] = self.transport_gap
        return json.dumps(out, sort_keys=True)


def invariance_experiment(data: Dataset, dictionary: Dictionary, cfg: FitConfig, s: float, U, shift) -> InvarianceReport:
    """Fit the original and a similarity-transformed problem and transport optima between them.

    The transformed problem has points ``x'_m = s U x_m - shift``, the same
    targets, and ``lam' = s lam``.  A network ``f`` for the original problem
    maps to ``g(x') = f(U^T (x' + shift) / s)``, whose penalty is
    ``||Delta_R f||_M / s``, so both problems have the same optimal value.
    The dictionary is carried over atom by atom.
    """
    U = np.asarray(U, dtype=np.float64)
    shift = np.asarray(shift, dtype=np.float64)
    inv_shift = -(U.T @ shift) / s
    data2 = Dataset(s * data.points @ U.T - shift, data.targets)
    cfg2 = FitConfig(**{**asdict(cfg), "lam": s * cfg.lam})
    dict2 = transform_dictionary(dictionary, 1.0 / s, U.T, inv_shift)
    r1 = fit(data, dictionary, cfg)
    r2 = fit(data2, dict2, cfg2)
    g = similarity_transform(r1.network, 1.0 / s, U.T, inv_shift)
    f = similarity_transform(r2.network, s, U, shift)
    j21 = objective(g, data2, cfg2.lam)[0]
    j12 = objective(f, data, cfg.lam)[0]
    ratio = objective(g, data2, 1.0)[2] / r1.reg_cost if r1.reg_cost else float("nan")
    return InvarianceReport(r1.objective, r2.objective, j21, j12, ratio, float(s))


def lambda_sweep(data: Dataset, dictionary: Dictionary, cfg: FitConfig, lams) -> list[tuple[float, float, float, int]]:
    """``(lam, data_loss, reg_cost, K0)`` for each ``lam``."""
    rows = []
    for lam in lams:
        r = fit(data, dictionary, FitConfig(**{**asdict(cfg), "lam": float(lam)}))
        rows.append((float(lam), r.data_loss, r.reg_cost, r.k0))
    return rows


def write_sweep_tsv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("lambda\tdata_loss\treg_cost\tK0\n")
        for lam, loss, reg, k0 in rows:
            fh.write(f"{lam!r}\t{loss!r}\t{reg!r}\t{k0}\n")
