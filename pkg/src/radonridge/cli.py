"""Command-line entry point: ``radonridge {sinogram,check,fit,invariance}``.

Exit codes: 0 success, 1 a check failed, 2 usage or input error.  Every run
writes ``manifest.json`` with the resolved configuration into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from math import pi

import numpy as np

from . import __version__
from .grid import Sinogram, integrate, make_grid
from .learner import (ConvergenceError, Dataset, FitConfig, build_dictionary, fit, invariance_experiment,
                      lambda_sweep, write_sweep_tsv)
from .poly import PairingQuadrature, biorthogonality_matrix, make_iso_window, project_poly, range_check
from .radon import (DiracAtomList, EuclideanField, GaussianBlobSinogram, fbp, fourier_slice_check,
                    measure_norm_witness, radon_isotropic, write_pgm)
from .ridge import kernel_h, kernel_h_oracle, make_corrections

__all__ = ["main", "build_parser", "sinogram_peak", "run_suite", "SUITES"]


def sinogram_peak(g: Sinogram, tie_rel: float = 1e-12) -> dict:
    """Largest sample over the half ``theta in [0, pi)`` (d=2).

    Samples within ``tie_rel`` (relative) of the maximum count as ties; ties
    resolve to the smallest ``theta``, then the smallest ``t``.  This makes
    the choice deterministic when the maximum is a plateau (``eps = 1``).
    """
    ang = g.grid.directions.angles()
    half = np.flatnonzero(ang < pi - 1e-12)
    half = half[np.argsort(ang[half], kind="stable")]
    vals = g.values[:, half]
    top = float(np.max(vals))
    cand = np.argwhere(vals >= top - tie_rel * abs(top))
    i, j = min(cand.tolist(), key=lambda ij: (ij[1], ij[0]))
    return {"t": float(g.grid.t[i]), "theta": float(ang[half[j]]), "value": float(vals[i, j]),
            "t_index": int(i), "dir_index": int(half[j])}


def _check(name: str, residual: float, tol: float, passed: bool | None = None) -> dict:
    ok = bool(residual <= tol) if passed is None else bool(passed)
    return {"name": name, "residual": float(residual), "tol": float(tol), "pass": ok}


def _suite_fbp(args) -> list[dict]:
    grid = make_grid(2, 720, 1025, 10.0)
    iso = radon_isotropic(lambda w: np.exp(-0.5 * w * w), [0.0, 0.0])
    g = Sinogram.from_function(grid, iso)
    x = np.linspace(-4.0, 4.0, 64)
    pts = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
    start = time.perf_counter()
    rec = fbp(g, pts)
    elapsed = time.perf_counter() - start
    truth = np.exp(-0.5 * np.sum(pts * pts, axis=-1)) / (2.0 * pi)
    rel = float(np.linalg.norm(rec - truth) / np.linalg.norm(truth))
    return [_check("fbp_relative_l2", rel, 1e-2), _check("fbp_runtime_seconds", elapsed, 30.0)]


def _suite_slice(args) -> list[dict]:
    f = EuclideanField.from_function(lambda p: np.exp(-0.5 * np.sum(p * p, axis=-1)) / (2.0 * pi), 8.0, 512)
    out = []
    for k in range(8):
        th = pi * k / 8
        out.append(_check(f"slice_theta_{k}pi/8", fourier_slice_check(f, [np.cos(th), np.sin(th)]), 1e-3))
    return out


def _suite_range(args) -> list[dict]:
    grid = make_grid(2, 64, 801, 10.0)
    out = []
    for label, x0 in (("centered", (0.0, 0.0)), ("shifted", (2.0, 2.0))):
        iso = radon_isotropic(lambda w: np.exp(-0.5 * w * w), list(x0))
        rep = range_check(Sinogram.from_function(grid, iso))
        out.append(_check(f"gaussian_{label}_evenness", rep.evenness, rep.tol_even))
        for k, v in sorted(rep.moment_max.items()):
            out.append(_check(f"gaussian_{label}_moment_{k}", v, rep.tol_moment))
    bad = Sinogram.from_function(grid, lambda t, xi: t * np.cos(3.0 * np.arctan2(xi[..., 1], xi[..., 0])) * np.exp(-t * t))
    rep = range_check(bad, k_max=1)
    out.append(_check("counterexample_moment_1_detected", rep.moment_max[1], 0.1, passed=rep.moment_max[1] > 0.1))
    return out


def _suite_kernel(args) -> list[dict]:
    win = make_iso_window(2, args.R0, args.mollifier_width)
    corr = make_corrections(win)
    xs = np.linspace(-4.0, 4.0, 5) / np.sqrt(2.0)
    pts = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    worst = 0.0
    for t in np.linspace(-4.0, 4.0, 5):
        for k in range(8):
            th = 2.0 * pi * k / 8
            xi = np.array([np.cos(th), np.sin(th)])
            worst = max(worst, float(np.max(np.abs(kernel_h(pts, t, xi, corr) - kernel_h_oracle(pts, t, xi, win)))))
    decay = float(np.max(np.abs(kernel_h(np.zeros(2), np.array([-20.0, 20.0]), np.array([1.0, 0.0]), corr))))
    return [_check("kernel_closed_form_vs_oracle", worst, 1e-4), _check("kernel_decay_at_t20", decay, 1e-3)]


def _suite_measure(args) -> list[dict]:
    one = measure_norm_witness(DiracAtomList([(1.0, 0.0, [1.0, 0.0])]), 0.125)
    two = DiracAtomList([(1.0, 0.0, [1.0, 0.0]), (-2.0, 3.0, [0.0, 1.0])])
    bounds = [measure_norm_witness(two, eps) for eps in (0.5, 0.25, 0.125)]
    mono = all(b.lower_bound >= a.lower_bound for a, b in zip(bounds, bounds[1:]))
    return [
        _check("single_atom_bound", abs(one.lower_bound - 1.0), 1e-12),
        _check("two_atom_bound_deficit", max(0.0, 2.9 - bounds[-1].lower_bound), 0.0),
        _check("two_atom_witness_sup", bounds[-1].sup_norm - 1.0, 1e-6),
        _check("bound_monotone_in_eps", 0.0 if mono else 1.0, 0.0),
    ]


def _suite_poly(args) -> list[dict]:
    win = make_iso_window(2, args.R0, args.mollifier_width)
    G = biorthogonality_matrix(win, 1)
    out = [_check("gram_identity", float(np.max(np.abs(G - np.eye(G.shape[0])))), 1e-5)]
    affine = lambda p: 0.3 - 1.2 * p[..., 0] + 0.7 * p[..., 1]
    c = project_poly(affine, win, 1, PairingQuadrature(h=2.0))
    out.append(_check("affine_reproduced", float(np.max(np.abs(c.coeffs - [0.3, -1.2, 0.7]))), 1e-5))
    return out


SUITES = {
    "fbp": _suite_fbp,
    "slice": _suite_slice,
    "range": _suite_range,
    "kernel": _suite_kernel,
    "measure-norm": _suite_measure,
    "poly": _suite_poly,
}


def run_suite(name: str, args=None) -> list[dict]:
    if args is None:
        args = build_parser().parse_args(["check", name])
    return SUITES[name](args)


def _read_config(path) -> dict:
    conf = {}
    with open(path) as fh:
        for n, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{n}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            conf[key.replace("-", "_")] = val
    return conf


_INT_KEYS = {"dirs", "nt", "seed", "offsets", "max_iter"}
_LIST_KEYS = {"eps", "x0", "shift", "sweep"}


def _coerce(key: str, val: str):
    if key in _INT_KEYS:
        return int(val)
    if key in _LIST_KEYS:
        return [float(v) for v in val.replace(",", " ").split()]
    if key in ("out", "solver", "dataset", "suite"):
        return val
    return float(val)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dirs", type=int, default=None, help="number of directions")
    common.add_argument("--nt", type=int, default=None, help="number of offsets (odd)")
    common.add_argument("--tmax", type=float, default=None, help="offset range")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="random seed recorded in the manifest")
    common.add_argument("--R0", type=float, default=0.5, help="window centre frequency")
    common.add_argument("--mollifier-width", type=float, default=0.5, help="window transition width")
    common.add_argument("--config", default=None, help="key=value file providing defaults")

    p = argparse.ArgumentParser(prog="radonridge", description="Radon-domain ridge tools")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sinogram", parents=[common], help="write localized Gaussian sinograms as PGM")
    s.add_argument("--eps", type=float, nargs="+", default=[1.0, 0.5, 0.25, 0.125], help="blob widths")
    s.add_argument("--x0", type=float, nargs="+", default=[2.0, 2.0], help="blob centre")

    c = sub.add_parser("check", parents=[common], help="run an identity suite")
    c.add_argument("suite", choices=sorted(SUITES))

    for name in ("fit", "invariance"):
        f = sub.add_parser(name, parents=[common], help=f"{name} on a CSV dataset")
        f.add_argument("dataset", help="CSV with header x1..xd,y")
        f.add_argument("--lam", type=float, default=1e-3, help="regularization weight")
        f.add_argument("--solver", choices=["fista", "coordinate_descent"], default="fista", help="lasso solver")
        f.add_argument("--offsets", type=int, default=12, help="offsets per direction")
        f.add_argument("--max-iter", type=int, default=20000, help="solver iteration cap")
        f.add_argument("--tol-kkt", type=float, default=1e-8, help="KKT residual target")
        f.add_argument("--prune", type=float, default=1e-8, help="relative weight below which atoms are dropped")
        f.add_argument("--atom", type=float, nargs="+", action="append", default=[],
                       help="extra dictionary atom: xi_1 ... xi_d tau")
        if name == "fit":
            f.add_argument("--sweep", type=float, nargs="+", default=None, help="lambda values for a sweep TSV")
        else:
            f.add_argument("--scale", type=float, default=3.0, help="similarity scale s")
            f.add_argument("--angle", type=float, default=30.0, help="rotation in degrees (d=2)")
            f.add_argument("--shift", type=float, nargs="+", default=[1.0, -1.0], help="translation vector")
    return p


def _write_manifest(out: str, args, extra: dict) -> None:
    conf = {k: v for k, v in sorted(vars(args).items())}
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump({"version": __version__, "config": conf, "results": extra}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_sinogram(args) -> int:
    if any(not 0 < e <= 1 for e in args.eps):
        raise ValueError("eps values must lie in (0, 1]")
    grid = make_grid(2, args.dirs or 360, args.nt or 6401, args.tmax or 64.0)
    peaks = []
    for eps in args.eps:
        g = Sinogram.from_function(grid, GaussianBlobSinogram(eps, args.x0))
        peak = sinogram_peak(g)
        peak["eps"] = float(eps)
        peak["integral"] = integrate(g)
        name = f"sinogram_eps{eps:g}.pgm"
        peak["file"] = name
        # rows follow t, columns the half-circle of directions
        ang = grid.directions.angles()
        half = np.flatnonzero(ang < pi - 1e-12)
        write_pgm(os.path.join(args.out, name), g.values[:, half[np.argsort(ang[half])]])
        peaks.append(peak)
        print(f"eps={eps:g} peak {peak['value']:.6g} at t={peak['t']:.4g} theta={peak['theta']:.4g}")
    _write_manifest(args.out, args, {"peaks": peaks})
    return 0


def _cmd_check(args) -> int:
    checks = SUITES[args.suite](args)
    ok = all(c["pass"] for c in checks)
    report = {"suite": args.suite, "passed": ok, "checks": checks}
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    with open(os.path.join(args.out, f"check_{args.suite}.json"), "w") as fh:
        fh.write(text + "\n")
    _write_manifest(args.out, args, report)
    return 0 if ok else 1


def _fit_inputs(args):
    data = Dataset.from_csv(args.dataset)
    dictionary = build_dictionary(data, args.dirs or 16, args.offsets)
    for atom in args.atom:
        if len(atom) != data.d + 1:
            raise ValueError(f"--atom needs {data.d} direction components and an offset")
        dictionary = dictionary.with_atoms([atom[:-1]], [atom[-1]])
    cfg = FitConfig(args.lam, solver=args.solver, max_iter=args.max_iter, tol_kkt=args.tol_kkt,
                    prune_threshold=args.prune)
    return data, dictionary, cfg


def _cmd_fit(args) -> int:
    data, dictionary, cfg = _fit_inputs(args)
    res = fit(data, dictionary, cfg)
    with open(os.path.join(args.out, "fit.json"), "w") as fh:
        fh.write(res.to_json() + "\n")
    results = {"K0": res.k0, "reg_cost": res.reg_cost, "objective": res.objective, "data_loss": res.data_loss,
               "kkt_residual": res.kkt_residual, "dictionary_size": dictionary.size}
    if args.sweep:
        rows = lambda_sweep(data, dictionary, cfg, args.sweep)
        write_sweep_tsv(os.path.join(args.out, "sweep.tsv"), rows)
    print(f"K0 {res.k0}  reg_cost {res.reg_cost:.12g}  objective {res.objective:.12g}")
    _write_manifest(args.out, args, results)
    return 0


def _cmd_invariance(args) -> int:
    data, dictionary, cfg = _fit_inputs(args)
    if data.d != 2:
        raise ValueError("the invariance command builds a planar rotation and needs d=2")
    th = np.deg2rad(args.angle)
    U = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    rep = invariance_experiment(data, dictionary, cfg, args.scale, U, np.array(args.shift))
    with open(os.path.join(args.out, "invariance.json"), "w") as fh:
        fh.write(rep.to_json() + "\n")
    print(f"objective gap {rep.objective_gap:.3e}  transport gap {rep.transport_gap:.3e}")
    _write_manifest(args.out, args, json.loads(rep.to_json()))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    if args.config:
        try:
            conf = _read_config(args.config)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        explicit = {a.split("=", 1)[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        for key, val in conf.items():
            if key in explicit or not hasattr(args, key) or key in ("command", "config"):
                continue
            try:
                setattr(args, key, _coerce(key, val))
            except ValueError:
                print(f"error: bad value {val!r} for {key}", file=sys.stderr)
                return 2
    os.makedirs(args.out, exist_ok=True)
    handlers = {"sinogram": _cmd_sinogram, "check": _cmd_check, "fit": _cmd_fit, "invariance": _cmd_invariance}
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc} (residual {exc.residual:.3e} after {exc.iterations} iterations)", file=sys.stderr)
        return 1
