"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import time
from math import pi

import numpy as np

from radonridge.cli import sinogram_peak
from radonridge.grid import Sinogram, integrate, make_grid
from radonridge.learner import (Dataset, FitConfig, build_dictionary, fit, invariance_experiment,
                                similarity_transform)
from radonridge.poly import PairingQuadrature, biorthogonality_matrix, make_iso_window, project_poly, range_check
from radonridge.radon import (DiracAtomList, EuclideanField, fbp, fourier_slice_check, gaussian_blob_sinogram,
                              measure_norm_witness, radon_isotropic)
from radonridge.ridge import (ReLUNetwork, extreme_point, kernel_h, kernel_h_oracle, make_corrections,
                              pseudoinverse_apply)


def report(number, title, checks):
    """Print one line per criterion and return whether every sub-check passed.

    ``checks`` is a list of ``(label, measured, tolerance_text, ok)``.
    """
    ok = all(c[3] for c in checks)
    detail = "; ".join(f"{label}={measured:.3e} ({tol}){'' if good else ' FAIL'}"
                       for label, measured, tol, good in checks)
    print(f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'} {title}: {detail}")
    return ok


def unit_gaussian(p):
    return np.exp(-0.5 * np.sum(p * p, axis=-1)) / (2 * pi)


def direction(theta):
    return np.array([np.cos(theta), np.sin(theta)])


def rotation(deg):
    th = np.deg2rad(deg)
    return np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])


def planted_data():
    x = np.random.default_rng(0).uniform(0, 1, (20, 2))
    return Dataset(x, 1 + np.maximum(x[:, 0] - 0.5, 0))


def test_criterion_01_fbp_identity():
    grid = make_grid(2, 720, 1025, 10.0)
    start = time.perf_counter()
    g = Sinogram.from_function(grid, radon_isotropic(lambda w: np.exp(-w * w / 2), [0.0, 0.0]))
    x = np.linspace(-4, 4, 64)
    pts = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
    rec = fbp(g, pts)
    elapsed = time.perf_counter() - start
    truth = unit_gaussian(pts)
    rel = float(np.linalg.norm(rec - truth) / np.linalg.norm(truth))
    assert report(1, "filtered back-projection", [
        ("relative_L2", rel, "<= 1e-2", rel <= 1e-2),
        ("seconds", elapsed, "<= 30", elapsed <= 30.0),
    ])


def test_criterion_02_fourier_slice():
    f = EuclideanField.from_function(unit_gaussian, 8.0, 512)
    res = max(fourier_slice_check(f, direction(pi * k / 8)) for k in range(8))
    assert report(2, "Fourier slice", [("max_residual_8_dirs", res, "<= 1e-3", res <= 1e-3)])


def test_criterion_03_range_conditions():
    grid = make_grid(2, 64, 801, 10.0)
    checks = []
    for label, x0 in (("centered", [0.0, 0.0]), ("shifted", [2.0, 2.0])):
        rep = range_check(Sinogram.from_function(grid, radon_isotropic(lambda w: np.exp(-w * w / 2), x0)))
        checks.append((f"{label}_evenness", rep.evenness, "<= 1e-12", rep.evenness <= 1e-12))
        worst = max(rep.moment_max.values())
        checks.append((f"{label}_moments_k<=3", worst, "<= 1e-6", worst <= 1e-6))
    bad = Sinogram.from_function(grid, lambda t, xi: t * np.cos(3 * np.arctan2(xi[..., 1], xi[..., 0])) * np.exp(-t * t))
    rep = range_check(bad, k_max=1)
    checks.append(("counterexample_k1", rep.moment_max[1], "> 0.1", rep.moment_max[1] > 0.1 and not rep.passed))
    assert report(3, "range conditions", checks)


def test_criterion_04_localized_sinograms():
    grid = make_grid(2, 360, 6401, 64.0)
    checks, peaks = [], []
    t_expected = grid.t[np.argmin(np.abs(grid.t - 2.0))]
    for eps in (1.0, 0.5, 0.25, 0.125):
        g = Sinogram.from_function(grid, gaussian_blob_sinogram(eps, [2.0, 2.0]))
        err = abs(integrate(g) - 2 * pi)
        checks.append((f"integral_err_eps{eps:g}", err, "<= 1e-6", err <= 1e-6))
        peak = sinogram_peak(g)
        at = peak["t"] == t_expected and peak["theta"] == 0.0
        checks.append((f"peak_offset_eps{eps:g}", abs(peak["t"] - 2.0) + peak["theta"], "cell at (2, 0)", at))
        peaks.append(peak["value"])
    gaps = np.diff(peaks)
    checks.append(("min_peak_increase", float(np.min(gaps)), "> 0", bool(np.all(gaps > 0))))
    assert report(4, "localized Radon-domain Gaussians", checks)


def test_criterion_05_measure_norm_witness():
    checks = []
    single = measure_norm_witness(DiracAtomList([(1.0, 0.0, [1.0, 0.0])]), 0.125)
    checks.append(("single_atom_bound", single.lower_bound, "== 1", single.lower_bound == 1.0))
    pair = DiracAtomList([(0.5, 1.5, direction(0.4)), (0.5, -1.5, -direction(0.4))])
    lb = measure_norm_witness(pair, 0.125).lower_bound
    checks.append(("collapsed_pair_norm", pair.norm, "== 1", pair.norm == 1.0 and abs(lb - 1.0) <= 1e-12))
    two = DiracAtomList([(1.0, 0.0, [1.0, 0.0]), (-2.0, 3.0, [0.0, 1.0])])
    bounds = [measure_norm_witness(two, eps) for eps in (0.5, 0.25, 0.125)]
    last = bounds[-1]
    checks.append(("two_atom_bound", last.lower_bound, ">= 2.9", last.lower_bound >= 2.9))
    checks.append(("witness_sup", last.sup_norm, "<= 1+1e-6", last.sup_norm <= 1 + 1e-6))
    lbs = [b.lower_bound for b in bounds]
    mono = all(b >= a for a, b in zip(lbs, lbs[1:]))
    checks.append(("bound_increase_min", float(np.min(np.diff(lbs))), ">= 0 as eps halves", mono))
    assert report(5, "measure-norm witness", checks)


def test_criterion_06_kernel_equivalence():
    win = make_iso_window()
    corr = make_corrections(win)
    xs = np.linspace(-4, 4, 5) / np.sqrt(2)
    pts = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    worst = 0.0
    for t in np.linspace(-4, 4, 5):
        for k in range(8):
            xi = direction(2 * pi * k / 8)
            worst = max(worst, float(np.max(np.abs(kernel_h(pts, t, xi, corr) - kernel_h_oracle(pts, t, xi, win)))))
    decay = float(np.max(np.abs(kernel_h(np.zeros(2), np.array([-20.0, 20.0]), direction(0.0), corr))))
    assert report(6, "kernel closed form vs definition", [
        ("max_abs_diff_5x5x8", worst, "<= 1e-4", worst <= 1e-4),
        ("abs_h0_at_t20", decay, "<= 1e-3", decay <= 1e-3),
    ])


def test_criterion_07_pseudoinverse_and_extreme_points():
    win = make_iso_window()
    corr = make_corrections(win)
    t0, xi0 = 0.7, direction(1.1)
    pair = DiracAtomList([(0.5, t0, xi0), (0.5, -t0, -xi0)])
    pts = np.random.default_rng(2).uniform(-4, 4, (400, 2))
    f = pseudoinverse_apply(pair, pts, corr)
    target = 0.5 * np.abs(pts @ xi0 - t0)
    A = np.column_stack([np.ones(len(pts)), pts])
    coef, *_ = np.linalg.lstsq(A, f - target, rcond=None)
    res = float(np.max(np.abs(f - target - A @ coef)))
    net = extreme_point(t0, xi0, 1, win)
    proj = float(np.max(np.abs(project_poly(net, win, 1).coeffs)))
    assert report(7, "pseudoinverse and extreme points", [
        ("affine_removed_residual", res, "<= 1e-4", res <= 1e-4),
        ("extreme_point_projection", proj, "<= 1e-5", proj <= 1e-5),
    ])


def test_criterion_08_learner():
    checks = []
    data = planted_data()
    d = build_dictionary(data, 16, 12).with_atoms([[1.0, 0.0]], [0.5])
    res = fit(data, d, FitConfig(1e-4))
    g = np.stack(np.meshgrid(np.linspace(0, 1, 41), np.linspace(0, 1, 41)), axis=-1).reshape(-1, 2)
    err = float(np.max(np.abs(res.network(g) - 1 - np.maximum(g[:, 0] - 0.5, 0))))
    checks.append(("planted_test_max_error", err, "<= 1e-2", err <= 1e-2))
    checks.append(("planted_K0", float(res.k0), "<= 3", res.k0 <= 3))
    rng = np.random.default_rng(7)
    small = Dataset(rng.normal(size=(10, 2)), rng.normal(size=10))
    ds = build_dictionary(small, 8, 10)
    a = fit(small, ds, FitConfig(0.1, solver="fista", tol_kkt=1e-9))
    b = fit(small, ds, FitConfig(0.1, solver="coordinate_descent", tol_kkt=1e-9))
    gap = abs(a.objective - b.objective)
    checks.append((f"solver_gap_{small.m}pts_{ds.size}atoms", gap, "<= 1e-8", gap <= 1e-8 and ds.size == 40))
    kkt = max(a.kkt_residual, b.kkt_residual, res.kkt_residual)
    checks.append(("kkt_residual", kkt, "<= 1e-6", kkt <= 1e-6))
    big = fit(data, d, FitConfig(1e6))
    A = np.column_stack([np.ones(data.m), data.points])
    ls, *_ = np.linalg.lstsq(A, data.targets, rcond=None)
    aff = float(np.max(np.abs(np.concatenate([[big.network.b], big.network.bvec]) - ls)))
    checks.append(("large_lambda_vs_affine_lstsq", aff, "<= 1e-10, no atoms", aff <= 1e-10 and big.k0 == 0))
    assert report(8, "sparse ReLU learner", checks)


def test_criterion_09_similarity_invariance():
    rng = np.random.default_rng(11)
    atoms = [(rng.normal(), direction(a), rng.normal()) for a in rng.uniform(0, 2 * pi, 6)]
    net = ReLUNetwork(rng.normal(), rng.normal(size=2), atoms)
    s, U, shift = 3.0, rotation(30), np.array([1.0, -1.0])
    g = similarity_transform(net, s, U, shift)
    x = rng.uniform(-3, 3, (100, 2))
    law = float(np.max(np.abs(g(x) - net(s * x @ U.T - shift))))
    data = planted_data()
    d = build_dictionary(data, 16, 12).with_atoms([[1.0, 0.0]], [0.5])
    cfg = FitConfig(1e-2, tol_kkt=1e-8)
    rep = invariance_experiment(data, d, cfg, s, U, shift)
    assert report(9, "similarity invariance (lambda' = s lambda)", [
        ("atom_law_pointwise", law, "<= 1e-12", law <= 1e-12),
        ("transported_objective_gap", rep.transport_gap, "<= 1e-6", rep.transport_gap <= 1e-6),
    ])


def test_criterion_10_biorthogonality():
    win = make_iso_window()
    lattice = PairingQuadrature(h=2.0)
    G = biorthogonality_matrix(win, 1, lattice)
    gram = float(np.max(np.abs(G - np.eye(3))))
    aff = lambda p: 0.3 - 1.2 * p[..., 0] + 0.7 * p[..., 1]
    c = project_poly(aff, win, 1, lattice)
    repro = float(np.max(np.abs(c.coeffs - [0.3, -1.2, 0.7])))
    f = lambda p: aff(p) + np.exp(-0.5 * np.sum(p * p, axis=-1))
    fine = PairingQuadrature(h=1.0)
    p1 = project_poly(f, win, 1, fine)
    idem = float(np.max(np.abs(project_poly(lambda p: f(p) - p1(p), win, 1, fine).coeffs)))
    assert report(10, "biorthogonality and projector", [
        ("gram_minus_identity", gram, "<= 1e-5", gram <= 1e-5),
        ("affine_reproduction", repro, "<= 1e-5", repro <= 1e-5),
        ("idempotence", idem, "<= 1e-8", idem <= 1e-8),
    ])
