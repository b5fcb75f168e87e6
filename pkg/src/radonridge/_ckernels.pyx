# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: line sums, linear back-projection, lasso sweeps."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs

cnp.import_array()


cdef inline double _bilinear(const double[:, ::1] v, double xmin, double h,
                             double px, double py) nogil:
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1]
    cdef double u = (px - xmin) / h
    cdef double w = (py - xmin) / h
    cdef double fu = floor(u), fw = floor(w)
    cdef Py_ssize_t a = <Py_ssize_t>fu, b = <Py_ssize_t>fw
    cdef double du = u - fu, dw = w - fw
    cdef double acc = 0.0
    if a < -1 or b < -1 or a >= n0 or b >= n1:
        return 0.0
    if a >= 0 and b >= 0:
        acc += (1.0 - du) * (1.0 - dw) * v[a, b]
    if a >= 0 and b + 1 < n1:
        acc += (1.0 - du) * dw * v[a, b + 1]
    if a + 1 < n0 and b >= 0:
        acc += du * (1.0 - dw) * v[a + 1, b]
    if a + 1 < n0 and b + 1 < n1:
        acc += du * dw * v[a + 1, b + 1]
    return acc


def line_integrals(const double[:, ::1] values, double xmin, double h,
                   const double[::1] t, const double[::1] c,
                   const double[::1] s, Py_ssize_t n_s):
    """Sum bilinear samples along the lines x = t(c, s) + sigma(-s, c)."""
    cdef Py_ssize_t n_lines = t.shape[0]
    cdef Py_ssize_t l, k
    cdef double sig, acc, half = 0.5 * (n_s - 1)
    out = np.zeros(n_lines, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for l in range(n_lines):
            acc = 0.0
            for k in range(n_s):
                sig = (k - half) * h
                acc += _bilinear(values, xmin, h,
                                 t[l] * c[l] - sig * s[l],
                                 t[l] * s[l] + sig * c[l])
            o[l] = acc * h
    return out


def backproject_linear(const double[:, ::1] table, double t0, double dt,
                       const double[:, ::1] dirs, const double[::1] weights,
                       const double[:, ::1] pts):
    """Weighted sum over directions of linearly interpolated profiles.

    ``table[j]`` holds the profile of direction ``j`` sampled at
    ``t0 + i * dt``.  Projections are clamped to the table range.
    """
    cdef Py_ssize_t n_dirs = table.shape[0], n_t = table.shape[1]
    cdef Py_ssize_t d = dirs.shape[1], n_pts = pts.shape[0]
    cdef Py_ssize_t p, j, q, i
    cdef double proj, u, fu, acc
    out = np.zeros(n_pts, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for p in range(n_pts):
            acc = 0.0
            for j in range(n_dirs):
                proj = 0.0
                for q in range(d):
                    proj += dirs[j, q] * pts[p, q]
                u = (proj - t0) / dt
                if u <= 0.0:
                    acc += weights[j] * table[j, 0]
                    continue
                if u >= n_t - 1:
                    acc += weights[j] * table[j, n_t - 1]
                    continue
                fu = floor(u)
                i = <Py_ssize_t>fu
                u -= fu
                acc += weights[j] * ((1.0 - u) * table[j, i] + u * table[j, i + 1])
            o[p] = acc
    return out


def lasso_cd(const double[:, ::1] gram, const double[::1] corr,
             double[::1] a, double lam, Py_ssize_t max_sweeps, double tol):
    """Cyclic coordinate descent for a'Ga - 2c'a + lam*|a|_1, in place.

    Returns the number of sweeps performed and the last max update.
    """
    cdef Py_ssize_t n = gram.shape[0]
    cdef Py_ssize_t sweep = 0, p, q
    cdef double delta, new, z, g, thr = 0.5 * lam
    cdef double[::1] ga = np.asarray(gram) @ np.asarray(a)
    with nogil:
        while sweep < max_sweeps:
            sweep += 1
            delta = 0.0
            for p in range(n):
                if gram[p, p] <= 0.0:
                    continue
                z = corr[p] - ga[p] + gram[p, p] * a[p]
                if z > thr:
                    new = (z - thr) / gram[p, p]
                elif z < -thr:
                    new = (z + thr) / gram[p, p]
                else:
                    new = 0.0
                g = new - a[p]
                if g != 0.0:
                    for q in range(n):
                        ga[q] += gram[q, p] * g
                    a[p] = new
                    if fabs(g) > delta:
                        delta = fabs(g)
            if delta <= tol:
                break
    return sweep, delta
