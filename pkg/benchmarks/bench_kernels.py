"""Time the compiled kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
timed on identical inputs for both backends, outputs are compared, and the
speedup is printed. Without the compiled extension only the numpy column is
reported.
"""

import argparse
import timeit

import numpy as np

from radonridge._backend import compiled_kernels, python_kernels


def cases(rng):
    """Build ``(name, fn_name, args_factory)`` triples with realistic sizes."""
    n = 257
    field = rng.normal(size=(n, n))
    h = 8.0 / (n - 1)
    n_lines = 4000
    theta = rng.uniform(0, np.pi, n_lines)
    line_args = (field, -4.0, h, rng.uniform(-3, 3, n_lines), np.cos(theta), np.sin(theta), n)

    n_dirs, n_t = 180, 801
    ang = np.pi * np.arange(n_dirs) / n_dirs
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    table = rng.normal(size=(n_dirs, n_t))
    pts = rng.uniform(-4, 4, (64 * 64, 2))
    bp_args = (table, -10.0, 20.0 / (n_t - 1), dirs, np.full(n_dirs, 1.0 / n_dirs), pts)

    m = 200
    X = rng.normal(size=(60, m))
    gram = X.T @ X
    corr = X.T @ rng.normal(size=60)

    def lasso_args():
        return (gram, corr, np.zeros(m), 5.0, 50, 0.0)

    return [
        ("line_integrals 4000 lines x 257 samples", "line_integrals", lambda: line_args),
        ("backproject_linear 180 dirs -> 4096 pts", "backproject_linear", lambda: bp_args),
        ("lasso_cd 200 atoms x 50 sweeps", "lasso_cd", lasso_args),
    ]


def time_call(fn, make_args, repeat):
    """Return the best wall time over ``repeat`` runs and the last output."""
    best = np.inf
    out = None
    for _ in range(repeat):
        args = make_args()
        start = timeit.default_timer()
        out = fn(*args)
        best = min(best, timeit.default_timer() - start)
        if isinstance(out, tuple):
            out = args[2]
    return best, np.asarray(out)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':44s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speedup':>8s} {'max diff':>9s}")
    for label, name, make_args in cases(rng):
        t_py, out_py = time_call(getattr(python_kernels, name), make_args, args.repeat)
        if compiled_kernels is None:
            print(f"{label:44s} {t_py:10.4f} {'n/a':>11s} {'n/a':>8s} {'n/a':>9s}")
            continue
        t_c, out_c = time_call(getattr(compiled_kernels, name), make_args, args.repeat)
        diff = float(np.max(np.abs(out_py - out_c)))
        print(f"{label:44s} {t_py:10.4f} {t_c:11.4f} {t_py / t_c:7.1f}x {diff:9.1e}")


if __name__ == "__main__":
    main()
