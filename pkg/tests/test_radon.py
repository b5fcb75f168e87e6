from math import factorial, pi

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as quad
from scipy import special

from radonridge.grid import Sinogram, integrate, make_grid
from radonridge.radon import (DiracAtomList, EuclideanField, RadialFilterSpec, backproject, backproject_measure_weak,
                              bessel_ratio, fbp, filter_constant, fourier_slice_check, gaussian_blob_sinogram,
                              hankel_profile, measure_norm_witness, radial_filter, radon_isotropic, radon_numeric,
                              rotation_to_e1, write_pgm)


def unit_gaussian(p):
    return np.exp(-0.5 * np.sum(p * p, axis=-1)) / (2 * pi)


def disk(p):
    return (np.sum(p * p, axis=-1) <= 1.0).astype(float)


@pytest.fixture(scope="module")
def gauss_field():
    return EuclideanField.from_function(unit_gaussian, 8.0, 512)


# oracles by direct 1D quadrature, independent of the FFT filter
def filtered_gaussian_at_zero():
    c2 = 1.0 / (4 * pi)
    val, _ = quad.quad(lambda w: c2 * abs(w) * np.sqrt(2 * pi) * np.exp(-w * w / 2), -np.inf, np.inf)
    return val / (2 * pi)


def test_filter_constant_values():
    assert filter_constant(2) == pytest.approx(1 / (4 * pi), rel=1e-15)
    assert filter_constant(3) == pytest.approx(1 / (8 * pi**2), rel=1e-15)


def test_gaussian_projections(gauss_field):
    g = make_grid(2, 16, 161, 8.0)
    s = radon_numeric(gauss_field, g)
    exact = np.exp(-g.t**2 / 2) / np.sqrt(2 * pi)
    assert np.max(np.abs(s.values - exact[:, None])) <= 1e-4


def test_zero_field_projects_to_zero():
    g = make_grid(2, 8, 21, 4.0)
    s = radon_numeric(EuclideanField(np.zeros((64, 64)), 4.0), g)
    assert np.max(np.abs(s.values)) == 0.0


def test_disk_chord_lengths():
    f = EuclideanField.from_function(disk, 8.0, 512)
    g = make_grid(2, 16, 201, 8.0)
    s = radon_numeric(f, g)
    chord = 2 * np.sqrt(np.clip(1 - g.t**2, 0, None))
    err = np.abs(s.values - chord[:, None])
    # indicator sampled on a lattice of step 0.031: measured 0.031 inside, 0.18 on the tangent lines
    assert np.max(err[np.abs(g.t) < 0.95]) <= 4e-2
    assert np.max(err) <= 0.2


def test_radial_filter_of_gaussian_at_zero():
    g = make_grid(2, 8, 2001, 20.0)
    s = Sinogram.from_function(g, lambda t, xi: np.exp(-t**2 / 2))
    out = radial_filter(s)
    oracle = filtered_gaussian_at_zero()
    assert oracle == pytest.approx(np.sqrt(2 * pi) / (4 * pi**2), rel=1e-10)
    assert np.max(np.abs(out.values[1000] - oracle)) <= 1e-4


def test_radial_filter_linearity_and_zero(rng):
    g = make_grid(2, 8, 101, 5.0)
    a = Sinogram(g, rng.normal(size=g.shape))
    b = Sinogram(g, rng.normal(size=g.shape))
    lhs = radial_filter(a.with_values(2.0 * a.values - 3.0 * b.values)).values
    rhs = 2.0 * radial_filter(a).values - 3.0 * radial_filter(b).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12
    assert np.max(np.abs(radial_filter(a.with_values(np.zeros(g.shape))).values)) == 0.0


def test_cosine_window_rolls_off_high_frequencies():
    spec = RadialFilterSpec(d=2, window="cosine")
    w = np.array([0.0, 1.0, np.pi])
    sym = spec.symbol(w, omega_nyq=np.pi)
    assert sym[0] == 0.0 and sym[1] > 0 and abs(sym[2]) <= 1e-15


def test_backprojection_of_constants():
    g = make_grid(2, 64, 41, 5.0)
    pts = np.array([[0.0, 0.0], [1.0, -2.0], [3.0, 0.5]])
    assert np.allclose(backproject(Sinogram(g, np.ones(g.shape)), pts), 2 * pi, atol=1e-12)
    s = Sinogram.from_function(g, lambda t, xi: np.exp(-t**2 / 2))
    assert backproject(s, np.zeros(2)) == pytest.approx(2 * pi, abs=1e-12)


def test_backprojection_range_error_names_point():
    g = make_grid(2, 8, 11, 1.0)
    with pytest.raises(ValueError, match=r"\[3.0, 0.0\]"):
        backproject(Sinogram(g, np.ones(g.shape)), np.array([[0.0, 0.0], [3.0, 0.0]]))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_projector_backprojector_adjoint(seed):
    # <R f, g> over the sinogram grid equals <f, R* g> over the lattice
    rng = np.random.default_rng(seed)
    c = rng.uniform(-1, 1, 2)
    s2 = rng.uniform(0.5, 1.5)
    f = EuclideanField.from_function(lambda p: np.exp(-np.sum((p - c) ** 2, axis=-1) / (2 * s2)), 8.0, 257)
    grid = make_grid(2, 64, 321, 12.0)
    a = rng.uniform(0.3, 1.0)
    g = Sinogram.from_function(grid, lambda t, xi: np.exp(-a * t**2) * (1 + 0.3 * xi[..., 0]))
    lhs = float(np.sum(grid.weights * radon_numeric(f, grid).values * g.values))
    rhs = float(np.sum(f.values * backproject(g, f.points())) * f.h**2)
    assert abs(lhs - rhs) <= 1e-3 * abs(rhs)


def test_fbp_recovers_shifted_gaussian():
    grid = make_grid(2, 360, 801, 12.0)
    iso = radon_isotropic(lambda w: np.exp(-w * w / 2), [2.0, 2.0])
    x = np.linspace(-4, 4, 65)
    pts = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
    rec = fbp(Sinogram.from_function(grid, iso), pts)
    i, j = np.unravel_index(np.argmax(rec), rec.shape)
    assert abs(x[i] - 2) <= x[1] - x[0] and abs(x[j] - 2) <= x[1] - x[0]


def test_fbp_of_zero():
    grid = make_grid(2, 16, 41, 4.0)
    assert np.max(np.abs(fbp(Sinogram(grid, np.zeros(grid.shape)), np.zeros((3, 2))))) == 0.0


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.1, 2.5])
def test_fourier_slice(gauss_field, theta):
    assert fourier_slice_check(gauss_field, [np.cos(theta), np.sin(theta)]) <= 1e-3


def test_fourier_slice_zero_and_disk():
    assert fourier_slice_check(EuclideanField(np.zeros((64, 64)), 4.0), [1.0, 0.0]) == 0.0
    f = EuclideanField.from_function(disk, 8.0, 512)
    assert fourier_slice_check(f, [np.cos(0.7), np.sin(0.7)]) <= 5e-2


def test_isotropic_profiles():
    iso = radon_isotropic(lambda w: np.exp(-w * w / 2), [0.0, 0.0])
    assert iso.profile(0.0) == pytest.approx(1 / np.sqrt(2 * pi), abs=1e-9)
    shifted = radon_isotropic(lambda w: np.exp(-w * w / 2), [2.0, 2.0])
    t = np.linspace(-1, 5, 601)
    vals = shifted(t, np.array([1.0, 0.0]))
    assert t[np.argmax(vals)] == pytest.approx(2.0, abs=1e-12)
    filt = radon_isotropic(lambda w: np.exp(-w * w / 2), [0.0, 0.0], filtered=True)
    # the sinogram is the unit-mass profile (2pi)^(-1/2) exp(-t^2/2)
    assert filt.profile(0.0) == pytest.approx(filtered_gaussian_at_zero() / np.sqrt(2 * pi), abs=1e-6)


def test_isotropic_rejects_odd_spectrum():
    with pytest.raises(ValueError):
        radon_isotropic(lambda w: w * np.exp(-w * w), [0.0, 0.0])


def test_hankel_pairs():
    w = np.linspace(0, 6, 61)
    g = hankel_profile(lambda t: np.exp(-t * t / 2) / (2 * pi), 2, w)
    assert np.max(np.abs(g - np.exp(-w * w / 2))) <= 1e-6
    assert np.max(np.abs(hankel_profile(lambda t: 0 * t, 2, w))) == 0.0
    # J1(1) from its power series
    j1 = sum((-1) ** m / (factorial(m) * factorial(m + 1)) * 0.5 ** (2 * m + 1) for m in range(20))
    val = hankel_profile(lambda t: (t <= 1).astype(float), 2, [1.0], t_max=1.0)
    assert val[0] == pytest.approx(2 * pi * j1, abs=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(1e-6, 40.0))
def test_bessel_ratio_matches_scipy(mu, z):
    assert bessel_ratio(mu, z) == pytest.approx(special.jv(mu, z) / z**mu, rel=1e-9, abs=1e-14)


def test_bessel_ratio_at_zero():
    assert bessel_ratio(0.0, 0.0) == 1.0
    assert bessel_ratio(1.0, 0.0) == pytest.approx(0.5)


def test_rotation_to_e1():
    for xi in ([0.6, 0.8], [-1.0, 0.0], [0.0, 0.0, 1.0], [-0.48, 0.6, 0.64]):
        U = rotation_to_e1(np.array(xi))
        assert np.allclose(U @ np.array(xi), np.eye(len(xi))[0], atol=1e-14)
        assert np.allclose(U.T @ U, np.eye(len(xi)), atol=1e-14)


def test_blob_sinogram_values():
    one = gaussian_blob_sinogram(1.0, [0.0, 0.0])
    t = np.linspace(-3, 3, 7)
    for th in (0.0, 0.4, 2.0):
        xi = np.array([np.cos(th), np.sin(th)])
        assert np.allclose(one(t, xi), np.exp(-t**2 / 2) / np.sqrt(2 * pi), atol=1e-15)
    half = gaussian_blob_sinogram(0.5, [0.0, 0.0])
    assert half(0.0, np.array([1.0, 0.0])) == pytest.approx((2 * pi / 4) ** -0.5, rel=1e-14)
    with pytest.raises(ValueError):
        gaussian_blob_sinogram(1.5, [0.0, 0.0])


def test_blob_integral_is_preserved():
    grid = make_grid(2, 360, 6401, 64.0)
    for eps in (1.0, 0.5, 0.25, 0.125):
        s = Sinogram.from_function(grid, gaussian_blob_sinogram(eps, [2.0, 2.0]))
        assert abs(integrate(s) - 2 * pi) <= 1e-6


def test_weak_backprojection_of_atoms(gauss_field):
    one = DiracAtomList([(1.0, 0.0, [1.0, 0.0])])
    assert backproject_measure_weak(one, gauss_field) == pytest.approx(1 / np.sqrt(2 * pi), abs=1e-4)
    assert backproject_measure_weak(DiracAtomList([]), gauss_field) == 0.0
    off = DiracAtomList([(1.0, 2.0, [1.0, 0.0])])
    assert backproject_measure_weak(off, gauss_field) == pytest.approx(np.exp(-2) / np.sqrt(2 * pi), abs=1e-4)


def test_atom_list_canonicalizes_and_merges():
    m = DiracAtomList([(0.5, 1.0, [0.6, 0.8]), (0.5, -1.0, [-0.6, -0.8])])
    assert len(m) == 1 and m.norm == 1.0
    assert m.t[0] == 1.0 and np.allclose(m.xi[0], [0.6, 0.8])
    assert len(DiracAtomList([(1.0, 0.0, [1.0, 0.0]), (-1.0, 0.0, [-1.0, 0.0])])) == 0
    with pytest.raises(ValueError):
        DiracAtomList([(1.0, 0.0, [1.0, 1.0])])


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.125])
def test_witness_single_atom(eps):
    lb, sup = measure_norm_witness(DiracAtomList([(1.0, 0.0, [1.0, 0.0])]), eps)
    assert lb == 1.0 and sup == 1.0


def test_witness_collapsed_pair():
    m = DiracAtomList([(0.5, 0.7, [0.0, 1.0]), (0.5, -0.7, [0.0, -1.0])])
    res = measure_norm_witness(m, 0.25)
    assert m.norm == 1.0
    assert res.lower_bound == pytest.approx(1.0, abs=1e-12)


def test_witness_is_a_lower_bound(rng):
    for _ in range(3):
        th = rng.uniform(0, pi, 3)
        atoms = DiracAtomList([(a, t, [np.cos(s), np.sin(s)]) for a, t, s in
                               zip(rng.normal(size=3), rng.uniform(-2, 2, 3), th)])
        res = measure_norm_witness(atoms, 0.25)
        assert res.lower_bound <= atoms.norm + 1e-12


def test_pgm_writer(tmp_path):
    img = np.arange(12, dtype=float).reshape(3, 4)
    path = tmp_path / "a.pgm"
    assert write_pgm(path, img) == (0.0, 11.0)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n4 3\n255\n")
    pix = np.frombuffer(raw[len(b"P5\n4 3\n255\n"):], np.uint8)
    assert pix[0] == 0 and pix[-1] == 255
    assert "max 11.0" in (tmp_path / "a.pgm.scale.txt").read_text()
