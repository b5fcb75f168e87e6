"""Numpy reference implementations of the compiled inner loops.

Each function mirrors the signature and semantics of its counterpart in
``_ckernels.pyx`` so the two can be swapped freely and compared in tests.
"""

import numpy as np


def _bilinear(values, xmin, h, px, py):
    n0, n1 = values.shape
    u = (px - xmin) / h
    w = (py - xmin) / h
    a = np.floor(u)
    b = np.floor(w)
    du = u - a
    dw = w - b
    a = a.astype(np.int64)
    b = b.astype(np.int64)
    acc = np.zeros(np.shape(px))
    for da, db, wt in (
        (0, 0, (1.0 - du) * (1.0 - dw)),
        (0, 1, (1.0 - du) * dw),
        (1, 0, du * (1.0 - dw)),
        (1, 1, du * dw),
    ):
        ia = a + da
        ib = b + db
        ok = (ia >= 0) & (ia < n0) & (ib >= 0) & (ib < n1)
        acc[ok] += wt[ok] * values[ia[ok], ib[ok]]
    return acc


def line_integrals(values, xmin, h, t, c, s, n_s):
    """Sum bilinear samples along the lines x = t(c, s) + sigma(-s, c)."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    sig = (np.arange(n_s) - 0.5 * (n_s - 1)) * h
    out = np.empty(t.shape[0])
    chunk = max(1, 2_000_000 // max(n_s, 1))
    for start in range(0, t.shape[0], chunk):
        sl = slice(start, start + chunk)
        px = (t[sl] * c[sl])[:, None] - sig[None, :] * s[sl][:, None]
        py = (t[sl] * s[sl])[:, None] + sig[None, :] * c[sl][:, None]
        out[sl] = _bilinear(values, xmin, h, px, py).sum(axis=1) * h
    return out


def backproject_linear(table, t0, dt, dirs, weights, pts):
    """Weighted sum over directions of linearly interpolated profiles."""
    table = np.asarray(table, dtype=np.float64)
    n_dirs, n_t = table.shape
    proj = np.asarray(pts, dtype=np.float64) @ np.asarray(dirs, dtype=np.float64).T
    u = np.clip((proj - t0) / dt, 0.0, n_t - 1)
    i = np.minimum(np.floor(u).astype(np.int64), n_t - 2)
    u -= i
    j = np.arange(n_dirs)[None, :]
    vals = (1.0 - u) * table[j, i] + u * table[j, i + 1]
    return vals @ np.asarray(weights, dtype=np.float64)


def lasso_cd(gram, corr, a, lam, max_sweeps, tol):
    """Cyclic coordinate descent for a'Ga - 2c'a + lam*|a|_1, in place."""
    n = gram.shape[0]
    ga = gram @ a
    thr = 0.5 * lam
    sweep = 0
    delta = 0.0
    while sweep < max_sweeps:
        sweep += 1
        delta = 0.0
        for p in range(n):
            gpp = gram[p, p]
            if gpp <= 0.0:
                continue
            z = corr[p] - ga[p] + gpp * a[p]
            if z > thr:
                new = (z - thr) / gpp
            elif z < -thr:
                new = (z + thr) / gpp
            else:
                new = 0.0
            g = new - a[p]
            if g != 0.0:
                ga += gram[:, p] * g
                a[p] = new
                delta = max(delta, abs(g))
        if delta <= tol:
            break
    return sweep, delta
