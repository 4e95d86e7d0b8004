"""Simulation experiment runner: CV-tuned fits compared on fresh test draws.

Methods:

* ``pclasso-min`` / ``pclasso-1se`` -- cross-validate (rat, lambda) over the
  standard rat grid, lambda by the min rule or the one-standard-error rule.
* ``lasso-min`` / ``lasso-1se``     -- the rat = 1 slice of the same CV run.
* ``pcr-cv``                        -- principal-components regression with the
  rank chosen by k-fold CV.
* ``null``                          -- the training mean.

Test error is the mean squared deviation from the noiseless test signal.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .crossval import CVConfig, CVResult, kfold_cv, make_folds
from .errors import DataError
from .simgen import SimData, SimSpec, generate
from .solver import Dataset, FitConfig

METHODS = ("pclasso-min", "pclasso-1se", "lasso-min", "lasso-1se", "pcr-cv", "null")


def pc_regression_cv(
    X: np.ndarray,
    y: np.ndarray,
    n_folds: int = 10,
    seed: int = 0,
    max_rank: int | None = None,
) -> tuple[int, float, np.ndarray]:
    """Principal-components regression with CV over the rank.

    Returns ``(rank, intercept, beta)`` fitted on the full data at the
    CV-chosen rank (rank 0 is the mean-only model).
    """
    n, p = X.shape
    cap = min(n - 1, p)
    if max_rank is not None:
        cap = min(cap, max_rank)
    ranks = np.arange(cap + 1)
    fold_ids = make_folds(n, n_folds, seed)
    errors = np.zeros((n_folds, ranks.size))
    for k in range(n_folds):
        val = fold_ids == k
        tr = ~val
        xm = X[tr].mean(axis=0)
        ym = float(y[tr].mean())
        Xc = X[tr] - xm
        U, d, Vt = np.linalg.svd(Xc, full_matrices=False)
        m = int(np.count_nonzero(d > 1e-10 * d[0])) if d.size else 0
        coefs = (U[:, :m].T @ (y[tr] - ym)) / d[:m]  # per-component loadings
        proj = (X[val] - xm) @ Vt[:m].T              # (n_val, m)
        pred = np.full(val.sum(), ym)
        errors[k, 0] = np.mean((y[val] - pred) ** 2)
        for r in range(1, ranks.size):
            if r <= m:
                pred = pred + proj[:, r - 1] * coefs[r - 1]
            errors[k, r] = np.mean((y[val] - pred) ** 2)
    best = int(np.argmin(errors.mean(axis=0)))
    xm = X.mean(axis=0)
    ym = float(y.mean())
    Xc = X - xm
    U, d, Vt = np.linalg.svd(Xc, full_matrices=False)
    m = min(best, int(np.count_nonzero(d > 1e-10 * d[0])))
    beta = np.zeros(p)
    if m > 0:
        beta = Vt[:m].T @ ((U[:, :m].T @ (y - ym)) / d[:m])
    return best, ym - float(xm @ beta), beta


@dataclass
class CellResult:
    method: str
    seed: int
    mse: float
    support_size: int
    chosen_rat: float  # NaN for methods without a rat


def _mse_row(intercept: float, beta: np.ndarray, data: SimData) -> tuple[float, int]:
    pred = intercept + data.X_test @ beta
    mse = float(np.mean((pred - data.signal_test) ** 2))
    return mse, int(np.count_nonzero(beta))


def run_cell(
    spec: SimSpec,
    methods=METHODS,
    cv_config: CVConfig | None = None,
    fit_config: FitConfig | None = None,
) -> list[CellResult]:
    """All requested methods on one simulated dataset (one seed)."""
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise DataError(f"unknown methods: {sorted(unknown)}")
    if spec.n_test < 1:
        raise DataError("run_cell needs n_test >= 1")
    data = generate(spec)
    cv_config = cv_config or CVConfig(fold_seed=spec.seed)
    if fit_config is None:
        fit_config = FitConfig(compute_df=False)
    rows: list[CellResult] = []

    needs_cv = any(m.startswith(("pclasso", "lasso")) for m in methods)
    cv: CVResult | None = None
    if needs_cv:
        cv = kfold_cv(Dataset(data.X, data.y), data.layout, cv_config, fit_config)

    for method in methods:
        if method == "null":
            mean = float(np.mean(data.y))
            mse = float(np.mean((mean - data.signal_test) ** 2))
            rows.append(CellResult(method, spec.seed, mse, 0, np.nan))
            continue
        if method == "pcr-cv":
            rank, b0, beta = pc_regression_cv(
                data.X, data.y, n_folds=cv_config.n_folds, seed=cv_config.fold_seed
            )
            mse, support = _mse_row(b0, beta, data)
            rows.append(CellResult(method, spec.seed, mse, support, np.nan))
            continue
        restrict = 1.0 if method.startswith("lasso") else None
        rule = "1se" if method.endswith("1se") else "min"
        rat, lam, _ = cv.select(rat=restrict, rule=rule)
        b0, beta = cv.coefficients(rat, lam)
        mse, support = _mse_row(b0, beta, data)
        rows.append(CellResult(method, spec.seed, mse, support, rat))
    return rows


def run_grid(
    base: SimSpec,
    seeds,
    rhos=(0.0,),
    snrs=(1.0,),
    courts=("home",),
    methods=METHODS,
    cv_config: CVConfig | None = None,
    fit_config: FitConfig | None = None,
) -> list[dict]:
    """Cartesian product of (court, rho, snr, seed); returns long-format rows."""
    rows = []
    for court in courts:
        for rho in rhos:
            for snr in snrs:
                for seed in seeds:
                    spec = replace(base, court=court, rho=float(rho), snr=float(snr), seed=int(seed))
                    cv_cfg = cv_config or CVConfig(fold_seed=int(seed))
                    for res in run_cell(spec, methods, cv_cfg, fit_config):
                        rows.append(
                            {
                                "court": court,
                                "rho": float(rho),
                                "snr": float(snr),
                                "seed": res.seed,
                                "method": res.method,
                                "mse": res.mse,
                                "support_size": res.support_size,
                                "chosen_rat": res.chosen_rat,
                            }
                        )
    return rows
