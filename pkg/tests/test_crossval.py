import numpy as np
import pytest

from pclasso import (
    CVConfig,
    DataError,
    Dataset,
    FitConfig,
    SimSpec,
    auc,
    fit_path,
    generate,
    kfold_cv,
)
from pclasso.crossval import make_folds


class TestAuc:
    def test_perfect_ordering(self):
        assert auc(np.array([0.1, 0.2, 0.8, 0.9]), np.array([0, 0, 1, 1])) == 1.0

    def test_all_ties(self):
        assert auc(np.ones(6), np.array([0, 1, 0, 1, 0, 1])) == 0.5

    def test_enumerated_example(self):
        # pairs: (0.1,0.35),(0.1,0.8),(0.4,0.35),(0.4,0.8) -> 3 concordant of 4
        scores = np.array([0.1, 0.4, 0.35, 0.8])
        labels = np.array([0, 0, 1, 1])
        assert auc(scores, labels) == pytest.approx(0.75)

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            auc(np.array([0.1, 0.2]), np.array([1, 1]))


class TestFolds:
    def test_partition(self):
        ids = make_folds(53, 7, seed=0)
        assert ids.size == 53
        counts = np.bincount(ids, minlength=7)
        assert counts.min() >= 53 // 7
        assert counts.sum() == 53

    def test_stratified(self):
        labels = np.array([0] * 30 + [1] * 10)
        ids = make_folds(40, 5, seed=1, labels=labels)
        for k in range(5):
            fold_labels = labels[ids == k]
            assert (fold_labels == 1).sum() == 2

    def test_deterministic(self):
        np.testing.assert_array_equal(make_folds(30, 3, 9), make_folds(30, 3, 9))


def small_gaussian(seed=0, n=60, p=12):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X[:, 0] * 2 + rng.standard_normal(n)
    return Dataset(X, y)


class TestKfold:
    def test_null_point_error_is_validation_variance(self):
        ds = small_gaussian()
        cv = kfold_cv(ds, None, CVConfig(n_folds=4, rat_grid=(1.0,), fold_seed=0),
                      FitConfig(n_lambda=10, compute_df=False))
        for k in range(4):
            val = cv.fold_ids == k
            tr = ~val
            mean_tr = ds.y[tr].mean()
            expected = np.mean((ds.y[val] - mean_tr) ** 2)
            assert cv.fold_errors[0, k, 0] == pytest.approx(expected, abs=1e-12)

    def test_rat_grid_one_matches_manual_lasso_cv(self):
        ds = small_gaussian(seed=1)
        cfg = FitConfig(n_lambda=15, compute_df=False)
        cv = kfold_cv(ds, None, CVConfig(n_folds=3, rat_grid=(1.0,), fold_seed=2), cfg)
        # manual fold loop with the engine at theta=0 over the same grid
        for k in range(3):
            val = cv.fold_ids == k
            ds_tr = Dataset(ds.X[~val], ds.y[~val])
            fit = fit_path(ds_tr, None, FitConfig(theta=0.0, lambda_grid=cv.lambdas,
                                                  compute_df=False))
            pred = fit.predict(ds.X[val])
            manual = ((ds.y[val][:, None] - pred) ** 2).mean(axis=0)
            np.testing.assert_allclose(cv.fold_errors[0, k], manual, atol=1e-10)
        assert cv.chosen_rat == 1.0

    def test_one_se_rule_definition(self):
        ds = small_gaussian(seed=3)
        cv = kfold_cv(ds, None, CVConfig(n_folds=5, rat_grid=(0.5, 1.0), fold_seed=1),
                      FitConfig(n_lambda=20, compute_df=False))
        rat, lam_1se, (ri, li) = cv.select(rule="1se")
        curve = cv.mean_error[ri]
        li_min = np.argmin(curve)
        thresh = curve[li_min] + cv.se_error[ri, li_min]
        # largest lambda (first index) within one se of the curve minimum
        assert li == int(np.flatnonzero(curve <= thresh)[0])
        assert lam_1se >= cv.chosen_lambda_min

    def test_degenerate_fold_rejected(self):
        X = np.random.default_rng(0).standard_normal((12, 3))
        y = np.ones(12)
        with pytest.raises(DataError, match="degenerate fold"):
            kfold_cv(Dataset(X, y), None, CVConfig(n_folds=3),
                     FitConfig(n_lambda=5, compute_df=False))

    def test_shared_svd_flag_recorded_and_off_mode(self):
        ds = small_gaussian(seed=4)
        cfg = FitConfig(n_lambda=8, compute_df=False)
        on = kfold_cv(ds, None, CVConfig(n_folds=3, rat_grid=(0.5,), shared_svd=True), cfg)
        off = kfold_cv(ds, None, CVConfig(n_folds=3, rat_grid=(0.5,), shared_svd=False), cfg)
        assert on.shared_svd and not off.shared_svd
        assert on.lambdas.shape == off.lambdas.shape

    def test_binomial_cv_reports_deviance_and_auc(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((80, 6))
        y = (rng.random(80) < 1 / (1 + np.exp(-X[:, 0]))).astype(float)
        ds = Dataset(X, y, family="binomial")
        cv = kfold_cv(ds, None, CVConfig(n_folds=4, rat_grid=(1.0,), fold_seed=3),
                      FitConfig(n_lambda=8, compute_df=False))
        assert cv.criterion == "deviance"
        assert cv.auc_mean is not None
        assert np.nanmax(cv.auc_mean) <= 1.0

    def test_deterministic_given_seed(self):
        ds = small_gaussian(seed=6)
        cfg = FitConfig(n_lambda=10, compute_df=False)
        cv1 = kfold_cv(ds, None, CVConfig(n_folds=4, rat_grid=(0.5, 1.0), fold_seed=7), cfg)
        cv2 = kfold_cv(ds, None, CVConfig(n_folds=4, rat_grid=(0.5, 1.0), fold_seed=7), cfg)
        np.testing.assert_array_equal(cv1.mean_error, cv2.mean_error)
        assert cv1.chosen_rat == cv2.chosen_rat
        assert cv1.chosen_lambda_min == cv2.chosen_lambda_min


@pytest.mark.slow
class TestStatisticalBehavior:
    def test_pure_noise_selects_near_empty_model_at_1se(self):
        hits = 0
        for seed in range(30):
            spec = SimSpec(n=60, sizes=(20,), rho=0.0, n_ev=1, court="neutral",
                           snr=0.005, n_test=0, seed=seed)
            data = generate(spec)
            cv = kfold_cv(Dataset(data.X, data.y), data.layout,
                          CVConfig(n_folds=5, rat_grid=(0.5, 1.0), fold_seed=seed),
                          FitConfig(n_lambda=30, compute_df=False))
            _, lam, (ri, li) = cv.select(rule="1se")
            fit = cv.full_fits[cv.rats[ri]]
            support = int(np.count_nonzero(fit.betas[:, li]))
            hits += support <= 2
        assert hits >= 24  # 80% of 30 seeds

    def test_top_eigenvector_signal_prefers_rat_below_one(self):
        wins = 0
        for seed in range(30):
            spec = SimSpec(n=200, sizes=(50,), rho=0.0, n_ev=5, court="home",
                           snr=2.0, n_test=0, seed=seed)
            data = generate(spec)
            cv = kfold_cv(Dataset(data.X, data.y), data.layout,
                          CVConfig(n_folds=5, fold_seed=seed),
                          FitConfig(n_lambda=50, tol=1e-5, compute_df=False))
            wins += cv.chosen_rat < 1.0
        assert wins > 15
