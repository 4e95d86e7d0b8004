"""Benchmark the compiled coordinate-descent kernel against the pure-python one.

Run:  python benchmarks/bench_kernels.py

Times full path fits on a few problem shapes with each backend.  The backends
implement the same sweep contract; the compiled one is selected automatically
at import unless PCLASSO_PURE_PYTHON=1.
"""

import time

import numpy as np

import pclasso
from pclasso import Dataset, FitConfig, fit_path
from pclasso import _cd_python, kernels


def make_problem(n, p, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    k = max(3, p // 25)
    beta = np.zeros(p)
    beta[rng.choice(p, size=k, replace=False)] = rng.normal(size=k) * 2
    y = X @ beta + rng.standard_normal(n)
    return Dataset(X, y)


def time_fit(ds, backend, repeats=3):
    kernels.cd_sweeps = backend
    # a loose tolerance keeps the pure-python run affordable; both backends
    # do identical work at identical settings
    cfg = FitConfig(rat=0.5, n_lambda=25, tol=1e-4, compute_df=False)
    # patch the solver's imported reference as well
    import pclasso.solver as solver

    solver.cd_sweeps = backend
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fit_path(ds, config=cfg)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    try:
        from pclasso import _cd_kernel
    except ImportError:
        _cd_kernel = None
    print(f"active backend at import: {pclasso.backend_name()}")
    shapes = [(100, 30), (200, 100), (150, 300)]
    print(f"{'shape':>12} {'python':>10} {'cython':>10} {'speedup':>9}")
    for n, p in shapes:
        ds = make_problem(n, p)
        t_py = time_fit(ds, _cd_python.cd_sweeps, repeats=1)
        if _cd_kernel is None:
            print(f"{n}x{p:>7} {t_py:>9.3f}s {'n/a':>10} {'n/a':>9}")
            continue
        t_cy = time_fit(ds, _cd_kernel.cd_sweeps)
        print(f"{n}x{p:>7} {t_py:>9.3f}s {t_cy:>9.3f}s {t_py / t_cy:>8.1f}x")


if __name__ == "__main__":
    main()
