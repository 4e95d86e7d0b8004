"""K-fold cross-validation over (rat, lambda) with min and one-standard-error rules.

One fold partition and one lambda grid are shared by every rat so the curves
are comparable; the per-group SVD is computed once on the full data and reused
across folds by default (turn ``shared_svd`` off to recompute per fold).  The
grid's top point is raised to the largest per-fold lambda_max so every fold is
null there.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DataError
from .groups import GroupLayout
from .solver import Dataset, FitConfig, PathFit, _lambda_grid, _prepare, fit_path


@dataclass
class CVConfig:
    n_folds: int = 10
    rat_grid: Sequence[float] = (0.25, 0.5, 0.75, 0.9, 0.95, 1.0)
    fold_seed: int = 0
    shared_svd: bool = True
    selection: str = "min"

    def __post_init__(self):
        if self.n_folds < 2:
            raise DataError("n_folds must be >= 2")
        rats = sorted(set(float(r) for r in self.rat_grid))
        if not rats or any(not 0.0 < r <= 1.0 for r in rats):
            raise DataError("rat_grid values must lie in (0, 1]")
        self.rat_grid = tuple(rats)
        if self.selection not in ("min", "1se"):
            raise DataError("selection must be 'min' or '1se'")


@dataclass
class CVResult:
    rats: np.ndarray
    lambdas: np.ndarray
    mean_error: np.ndarray        # (R, L)
    se_error: np.ndarray          # (R, L)
    fold_errors: np.ndarray       # (R, K, L)
    criterion: str
    chosen_rat: float
    chosen_lambda_min: float
    chosen_lambda_1se: float
    selection: str
    shared_svd: bool
    fold_ids: np.ndarray
    full_fits: dict
    auc_mean: np.ndarray | None = None

    @property
    def chosen_lambda(self) -> float:
        return self.chosen_lambda_1se if self.selection == "1se" else self.chosen_lambda_min

    def select(self, rat: float | None = None, rule: str = "min"):
        """Best (rat, lambda) under ``rule``, optionally restricted to one rat.

        Returns ``(rat, lam, (rat_index, lambda_index))``.  The one-standard-
        error rule picks, within the winning rat's curve, the largest lambda
        whose mean error is within one standard error of that curve's minimum.
        """
        if rat is None:
            cand = range(self.rats.size)
        else:
            matches = np.flatnonzero(np.isclose(self.rats, rat))
            if matches.size == 0:
                raise DataError(f"rat {rat} not in the CV grid")
            cand = [int(matches[0])]
        l_min = {r: int(np.argmin(self.mean_error[r])) for r in cand}
        r_best = min(cand, key=lambda r: self.mean_error[r, l_min[r]])
        li = l_min[r_best]
        if rule == "min":
            return float(self.rats[r_best]), float(self.lambdas[li]), (r_best, li)
        if rule != "1se":
            raise DataError("rule must be 'min' or '1se'")
        thresh = self.mean_error[r_best, li] + self.se_error[r_best, li]
        l_1se = int(np.flatnonzero(self.mean_error[r_best] <= thresh)[0])
        return float(self.rats[r_best]), float(self.lambdas[l_1se]), (r_best, l_1se)

    def coefficients(self, rat: float, lam: float) -> tuple[float, np.ndarray]:
        """(intercept, beta) of the full-data fit for ``rat`` at grid lambda ``lam``."""
        fit: PathFit = self.full_fits[float(rat)]
        li = int(np.argmin(np.abs(fit.lambdas - lam)))
        return float(fit.intercepts[li]), fit.betas[:, li]


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve: rank statistic with ties counted one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        raise DataError("auc requires both classes present")
    ranks = rankdata(scores)
    u = float(ranks[pos].sum()) - n1 * (n1 + 1) / 2.0
    return u / (n1 * n0)


def make_folds(
    n: int, n_folds: int, seed: int, labels: np.ndarray | None = None
) -> np.ndarray:
    """Fold id per observation; stratified by class when labels are given."""
    if n_folds > n:
        raise DataError("n_folds exceeds the number of observations")
    rng = np.random.default_rng(seed)
    ids = np.empty(n, dtype=np.int64)
    if labels is None:
        perm = rng.permutation(n)
        ids[perm] = np.arange(n) % n_folds
    else:
        for cls in np.unique(labels):
            members = np.flatnonzero(labels == cls)
            perm = rng.permutation(members)
            ids[perm] = np.arange(members.size) % n_folds
    return ids


def _binomial_lambda_max(prep, y: np.ndarray) -> float:
    from .solver import PROB_CLAMP

    pbar = float(np.clip(prep.w @ y / prep.n, PROB_CLAMP, 1.0 - PROB_CLAMP))
    return float(np.max(np.abs(prep.Xw.T @ (y - pbar))))


def kfold_cv(
    dataset: Dataset,
    layout: GroupLayout | None = None,
    cv_config: CVConfig | None = None,
    fit_config: FitConfig | None = None,
    threads: int = 1,
) -> CVResult:
    """Cross-validate over the rat grid; see the module docstring for the protocol."""
    cv_config = cv_config or CVConfig()
    fit_config = fit_config or FitConfig()
    if layout is None:
        layout = GroupLayout.single(dataset.X.shape[1])
    n = dataset.n
    binomial = dataset.family == "binomial"
    fold_ids = make_folds(
        n, cv_config.n_folds, cv_config.fold_seed, dataset.y if binomial else None
    )

    base = replace(fit_config, rat=None, theta=None, compute_df=False)
    full_prep = _prepare(dataset, layout, base)
    shared_penalty = full_prep.penalty if cv_config.shared_svd else None

    raw_w = dataset.weights if dataset.weights is not None else np.ones(n)
    fold_data = []
    lam_tops = [
        full_prep.lambda_max if not binomial else _binomial_lambda_max(full_prep, dataset.y)
    ]
    for k in range(cv_config.n_folds):
        val = fold_ids == k
        tr = ~val
        y_tr = dataset.y[tr]
        w_tr = raw_w[tr]
        mean_tr = float(w_tr @ y_tr / w_tr.sum())
        if np.allclose(y_tr, mean_tr):
            raise DataError("degenerate fold: zero-variance response")
        ds_tr = Dataset(
            dataset.X[tr],
            y_tr,
            weights=dataset.weights[tr] if dataset.weights is not None else None,
            family=dataset.family,
        )
        prep_tr = _prepare(ds_tr, layout, base, penalty=shared_penalty)
        lam_tops.append(
            prep_tr.lambda_max if not binomial else _binomial_lambda_max(prep_tr, y_tr)
        )
        fold_data.append((ds_tr, prep_tr.penalty, val))

    top = float(max(lam_tops))
    grid_cfg = replace(base, lambda_grid=None)
    lambdas = _lambda_grid(top, full_prep.p, n, grid_cfg)

    rats = np.asarray(cv_config.rat_grid)
    R, K, L = rats.size, cv_config.n_folds, lambdas.size
    fold_errors = np.zeros((R, K, L))
    auc_scores = np.zeros((R, K, L)) if binomial else None
    full_fits: dict[float, PathFit] = {}

    def full_job(ri: int) -> PathFit:
        cfg_full = replace(fit_config, rat=float(rats[ri]), theta=None, lambda_grid=lambdas)
        return fit_path(dataset, layout, cfg_full, penalty=shared_penalty)

    def fold_job(ri: int, k: int):
        ds_tr, pen_tr, val = fold_data[k]
        cfg = replace(base, rat=float(rats[ri]), lambda_grid=lambdas)
        fit = fit_path(ds_tr, layout, cfg, penalty=pen_tr)
        X_val = dataset.X[val]
        y_val = dataset.y[val]
        w_val = raw_w[val]
        auc_row = None
        if binomial:
            prob = np.clip(fit.predict(X_val, kind="response"), 1e-12, 1 - 1e-12)
            ll = y_val[:, None] * np.log(prob) + (1 - y_val)[:, None] * np.log1p(-prob)
            err_row = -2.0 * (w_val @ ll) / w_val.sum()
            auc_row = np.empty(L)
            for li in range(L):
                try:
                    auc_row[li] = auc(prob[:, li], y_val)
                except DataError:
                    auc_row[li] = np.nan
        else:
            pred = fit.predict(X_val)
            err_row = (w_val @ (y_val[:, None] - pred) ** 2) / w_val.sum()
        return err_row, auc_row

    jobs = [(ri, k) for ri in range(R) for k in range(K)]
    if threads > 1:
        # cell results land in preallocated slots, so scheduling order is
        # irrelevant and the output matches a sequential run exactly
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            fulls = list(pool.map(full_job, range(R)))
            outs = list(pool.map(lambda t: fold_job(*t), jobs))
    else:
        fulls = [full_job(ri) for ri in range(R)]
        outs = [fold_job(ri, k) for ri, k in jobs]
    for ri in range(R):
        full_fits[float(rats[ri])] = fulls[ri]
    for (ri, k), (err_row, auc_row) in zip(jobs, outs):
        fold_errors[ri, k] = err_row
        if binomial:
            auc_scores[ri, k] = auc_row

    mean_error = fold_errors.mean(axis=1)
    se_error = fold_errors.std(axis=1, ddof=1) / np.sqrt(K)
    auc_mean = auc_scores.mean(axis=1) if binomial else None

    result = CVResult(
        rats=rats,
        lambdas=lambdas,
        mean_error=mean_error,
        se_error=se_error,
        fold_errors=fold_errors,
        criterion="deviance" if binomial else "mse",
        chosen_rat=np.nan,
        chosen_lambda_min=np.nan,
        chosen_lambda_1se=np.nan,
        selection=cv_config.selection,
        shared_svd=cv_config.shared_svd,
        fold_ids=fold_ids,
        full_fits=full_fits,
        auc_mean=auc_mean,
    )
    rat_min, lam_min, _ = result.select(rule="min")
    _, lam_1se, _ = result.select(rule="1se")
    result.chosen_rat = rat_min
    result.chosen_lambda_min = lam_min
    result.chosen_lambda_1se = lam_1se
    return result
