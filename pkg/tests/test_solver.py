import numpy as np
import pytest

from pclasso import (
    DataError,
    Dataset,
    FitConfig,
    GroupLayout,
    build_group_penalty,
    fit_path,
    kkt_report,
    lambda_max,
    soft_threshold,
)
from pclasso.kernels import cd_sweeps
from pclasso.penalty import GroupPenalty
from pclasso.solver import _prepare

from oracles import augmented_data, pclasso_objective, ref_lasso_cd, ref_lasso_path


def centered_problem(n, p, seed, sparsity=3, noise=0.5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X -= X.mean(axis=0)
    beta = np.zeros(p)
    beta[rng.choice(p, size=min(sparsity, p), replace=False)] = rng.normal(size=min(sparsity, p)) * 2
    y = X @ beta + noise * rng.standard_normal(n)
    y -= y.mean()
    return X, y


class TestSoftThreshold:
    @pytest.mark.parametrize("z,lam,expected", [(3, 1, 2), (-0.5, 1, 0), (-3, 1, -2)])
    def test_examples(self, z, lam, expected):
        assert soft_threshold(z, lam) == expected

    def test_negative_lambda_rejected(self):
        with pytest.raises(DataError):
            soft_threshold(1.0, -0.1)


class TestLambdaMax:
    def test_orthogonal_response(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        y = np.array([1.0, 1.0, 0.0, 0.0])  # orthogonal to both columns
        assert lambda_max(X, y) == 0.0

    def test_single_column(self):
        X = np.array([[1.0], [2.0], [0.0]])
        y = np.array([1.0, 2.0, 7.0])  # x'y = 5
        assert lambda_max(X, y) == pytest.approx(5.0)

    def test_zero_design_rejected(self):
        with pytest.raises(DataError):
            lambda_max(np.zeros((3, 2)), np.ones(3))

    def test_path_self_consistency(self):
        X, y = centered_problem(40, 10, seed=0)
        ds = Dataset(X, y)
        cfg = FitConfig(rat=0.7, standardize=False, fit_intercept=False, compute_df=False)
        prep_lam = lambda_max(X, y)
        fit = fit_path(ds, config=FitConfig(
            rat=0.7, standardize=False, fit_intercept=False,
            lambda_grid=[prep_lam, 0.999 * prep_lam], compute_df=False))
        assert np.all(fit.betas[:, 0] == 0.0)
        assert np.any(fit.betas[:, 1] != 0.0)


class TestCoordinateUpdates:
    def test_orthonormal_one_sweep_is_lasso(self):
        # orthonormal design, theta=0: a single sweep from zero lands on S(x'y, lam)
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.standard_normal((20, 6)))
        X = q
        y = rng.standard_normal(20)
        lam = 0.3
        ds = Dataset(X, y)
        cfg = FitConfig(theta=0.0, standardize=False, fit_intercept=False,
                        lambda_grid=[lam], compute_df=False, use_strong_rules=False)
        fit = fit_path(ds, config=cfg)
        expected = np.array([soft_threshold(X[:, j] @ y, lam) for j in range(6)])
        np.testing.assert_allclose(fit.betas[:, 0], expected, atol=1e-12)
        assert fit.n_sweeps[0] <= 2  # second sweep only confirms convergence

    def test_single_predictor(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(15)
        y = 2.0 * x + 0.1 * rng.standard_normal(15)
        lam = 0.5
        cfg = FitConfig(rat=0.5, standardize=False, fit_intercept=False,
                        lambda_grid=[lam], compute_df=False)
        fit = fit_path(Dataset(x[:, None], y), config=cfg)
        v = float(x @ x)
        expected = soft_threshold(float(x @ y), lam) / v  # p=1 so A = 0
        assert fit.betas[0, 0] == pytest.approx(expected, rel=1e-10)
        assert fit.theta == 0.0  # d2_sq = 0 collapses every rat to the lasso

    def test_kkt_on_random_problem(self):
        X, y = centered_problem(20, 5, seed=3)
        lam = 0.4 * lambda_max(X, y)
        cfg = FitConfig(theta=2.0, standardize=False, fit_intercept=False,
                        lambda_grid=[lam], compute_df=False)
        ds = Dataset(X, y)
        fit = fit_path(ds, config=cfg)
        rep = kkt_report(ds, fit, cfg)
        assert rep["max_active_violation"] < 1e-6 * rep["lambda_max"]
        assert rep["max_inactive_excess"] < 1e-6 * rep["lambda_max"]

    def test_objective_monotone_over_sweeps(self):
        X, y = centered_problem(25, 8, seed=4)
        theta, lam = 1.5, 0.2 * lambda_max(X, y)
        ds = Dataset(X, y)
        cfg = FitConfig(theta=theta, standardize=False, fit_intercept=False)
        pb = _prepare(ds, None, cfg)
        A = pb.penalty.full_matrix()
        beta = np.zeros(pb.p)
        r = pb.y.copy()
        abeta = np.zeros(pb.p)
        idx = np.arange(pb.p, dtype=np.int64)
        objs = [pclasso_objective(pb.X, pb.y, beta, lam, theta, A)]
        for _ in range(30):
            cd_sweeps(pb.X, pb.Xw, r, beta, abeta, pb.v, pb.sv, pb.adiag, theta, lam,
                      idx, pb.ab_flat, pb.ab_off, pb.grp_of, pb.grp_start, pb.grp_size,
                      1e-15, 1)
            objs.append(pclasso_objective(pb.X, pb.y, beta, lam, theta, A))
        objs = np.array(objs)
        assert np.all(np.diff(objs) <= 1e-12 * np.abs(objs[:-1]) + 1e-12)


class TestFitPath:
    def test_theta_zero_equals_zero_matrix_engine(self):
        # theta=0 with the real penalty must match theta>0 with an all-zero penalty
        X, y = centered_problem(30, 12, seed=5)
        ds = Dataset(X, y)
        layout = GroupLayout.single(12)
        cfg0 = FitConfig(theta=0.0, compute_df=False)
        fit0 = fit_path(ds, layout, cfg0)
        real = build_group_penalty(
            np.asfortranarray((X - X.mean(0)) / X.std(0)), layout
        )
        zeroed = GroupPenalty(
            svds=real.svds,
            blocks=(np.zeros((12, 12)),),
            scales=np.ones(1),
            d1_sq=real.d1_sq,
            d2_sq=real.d2_sq,
            layout=layout,
        )
        fit1 = fit_path(ds, layout, FitConfig(theta=5.0, lambda_grid=fit0.lambdas,
                                              compute_df=False), penalty=zeroed)
        np.testing.assert_allclose(fit0.betas, fit1.betas, atol=1e-6)

    @pytest.mark.parametrize("theta", [0.1, 1.0, 10.0])
    def test_lambda_zero_closed_form(self, theta):
        # n > p, lam = 0: fitted values follow the per-component shrinkage formula
        rng = np.random.default_rng(6)
        X = rng.standard_normal((60, 25))
        X -= X.mean(axis=0)
        y = X[:, 0] + rng.standard_normal(60)
        y -= y.mean()
        cfg = FitConfig(theta=theta, lambda_grid=[0.0], standardize=False,
                        fit_intercept=False, tol=1e-9, compute_df=False)
        fit = fit_path(Dataset(X, y), config=cfg)
        U, d, _ = np.linalg.svd(X, full_matrices=False)
        shrink = d**2 / (d**2 + theta * (d[0] ** 2 - d**2))
        oracle = U @ (shrink * (U.T @ y))
        fitted = X @ fit.betas[:, 0]
        assert np.linalg.norm(fitted - oracle) < 1e-6 * np.linalg.norm(oracle)

    def test_augmented_lasso_equivalence(self):
        # objective identity with an independently solved lasso on stacked data
        X, y = centered_problem(35, 15, seed=7)
        layout = GroupLayout.single(15)
        pen = build_group_penalty(X, layout)
        A = pen.full_matrix()
        theta = 1.7
        lam_top = lambda_max(X, y)
        Xt, yt = augmented_data(X, y, A, theta)
        for frac in (0.6, 0.25, 0.08):
            lam = frac * lam_top
            cfg = FitConfig(theta=theta, lambda_grid=[lam], standardize=False,
                            fit_intercept=False, tol=1e-9, compute_df=False)
            fit = fit_path(Dataset(X, y), config=cfg, penalty=pen)
            beta_ref = ref_lasso_cd(Xt, yt, lam)
            obj_ours = pclasso_objective(X, y, fit.betas[:, 0], lam, theta, A)
            obj_ref = pclasso_objective(X, y, beta_ref, lam, theta, A)
            assert abs(obj_ours - obj_ref) / obj_ref < 1e-8
            np.testing.assert_allclose(fit.betas[:, 0], beta_ref, atol=1e-6)

    def test_null_point_and_intercept(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((30, 6)) + 2.0
        y = X[:, 0] + rng.standard_normal(30) + 5.0
        w = rng.uniform(0.5, 2.0, size=30)
        ds = Dataset(X, y, weights=w)
        fit = fit_path(ds, config=FitConfig(rat=0.8, n_lambda=10, compute_df=False))
        assert np.all(fit.betas[:, 0] == 0.0)
        assert fit.intercepts[0] == pytest.approx(float(w @ y / w.sum()), rel=1e-12)
        # active sets match the exact-zero pattern in expanded coordinates
        for i in range(fit.n_lambda):
            np.testing.assert_array_equal(
                fit.active_sets[i], np.flatnonzero(fit.betas_expanded_std[:, i])
            )

    def test_weights_match_row_duplication(self):
        # weight 2 on one row equals duplicating it, with lam and theta scaled
        # by (n+1)/n to undo the sum-to-n weight normalization
        rng = np.random.default_rng(9)
        n, p = 12, 4
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        w = np.ones(n)
        w[3] = 2.0
        X_dup = np.vstack([X, X[3]])
        y_dup = np.append(y, y[3])
        lam, theta = 2.0, 1.3
        scale = (n + 1) / n
        # the penalty SVD is computed from the unweighted standardized design,
        # so share one penalty: the equivalence is about the loss handling
        pen = _prepare(Dataset(X, y, weights=w), None, FitConfig()).penalty
        cfg_w = FitConfig(theta=theta, lambda_grid=[lam], compute_df=False)
        fit_w = fit_path(Dataset(X, y, weights=w), config=cfg_w, penalty=pen)
        cfg_d = FitConfig(theta=theta * scale, lambda_grid=[lam * scale], compute_df=False)
        fit_d = fit_path(Dataset(X_dup, y_dup), config=cfg_d, penalty=pen)
        np.testing.assert_allclose(fit_w.betas[:, 0], fit_d.betas[:, 0], atol=1e-8)
        assert fit_w.intercepts[0] == pytest.approx(fit_d.intercepts[0], abs=1e-8)

    def test_free_ride_limit_matches_rank_one_pc_fit(self):
        # theta = 1e4 * d1^2 makes the lam=0 problem condition number ~1e4,
        # so keep the problem small and give the sweeps a large budget
        rng = np.random.default_rng(10)
        X = rng.standard_normal((30, 4))
        X -= X.mean(axis=0)
        y = X @ rng.standard_normal(4) + 0.3 * rng.standard_normal(30)
        y -= y.mean()
        U, d, _ = np.linalg.svd(X, full_matrices=False)
        theta = 1e4 * d[0] ** 2
        cfg = FitConfig(theta=theta, lambda_grid=[0.0], standardize=False,
                        fit_intercept=False, tol=1e-11, max_iter=3_000_000,
                        compute_df=False)
        fit = fit_path(Dataset(X, y), config=cfg)
        fitted = X @ fit.betas[:, 0]
        pc1 = U[:, 0] * (U[:, 0] @ y)
        assert np.linalg.norm(fitted - pc1) < 1e-2 * np.linalg.norm(pc1)

    def test_path_continuity_and_warm_start_benefit(self):
        X, y = centered_problem(60, 30, seed=11)
        ds = Dataset(X, y)
        cfg = FitConfig(rat=0.5, n_lambda=40, compute_df=False)
        fit = fit_path(ds, cfg and None, cfg)
        steps = np.linalg.norm(np.diff(fit.betas, axis=1), axis=0)
        assert np.all(np.isfinite(steps))
        assert steps.max() < 1.0 + np.linalg.norm(fit.betas[:, -1])
        # cold starts: one single-lambda fit per grid point
        cold = np.array([
            fit_path(ds, None, FitConfig(rat=0.5, lambda_grid=[lam], compute_df=False)).n_sweeps[0]
            for lam in fit.lambdas
        ])
        frac_not_worse = np.mean(fit.n_sweeps <= cold)
        assert frac_not_worse >= 0.9
        assert fit.n_sweeps.sum() < cold.sum()

    def test_overlapping_groups_against_manual_expansion(self):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((40, 5))
        y = rng.standard_normal(40)
        layout = GroupLayout.from_group_lists([[0, 1, 2], [2, 3, 4]])
        cfg = FitConfig(rat=0.5, n_lambda=12, compute_df=False)
        fit = fit_path(Dataset(X, y), layout, cfg)
        # same fit on the manually expanded design with disjoint groups
        X_exp = X[:, layout.replication_map]
        layout_exp = GroupLayout.from_group_lists([[0, 1, 2], [3, 4, 5]])
        fit_exp = fit_path(Dataset(X_exp, y), layout_exp,
                           FitConfig(rat=0.5, lambda_grid=fit.lambdas, compute_df=False))
        collapsed = layout.collapse(fit_exp.betas)
        np.testing.assert_allclose(fit.betas, collapsed, atol=1e-10)
        np.testing.assert_allclose(fit.intercepts, fit_exp.intercepts, atol=1e-10)

    def test_nan_rejected(self):
        X = np.ones((5, 2))
        X[0, 0] = np.nan
        with pytest.raises(DataError):
            Dataset(X, np.ones(5))

    def test_predict_round_trip(self):
        X, y = centered_problem(30, 8, seed=13)
        ds = Dataset(X, y)
        fit = fit_path(ds, config=FitConfig(rat=0.9, n_lambda=15, compute_df=False))
        pred = fit.predict(X)
        assert pred.shape == (30, 15)
        i = 7
        manual = fit.intercepts[i] + X @ fit.betas[:, i]
        np.testing.assert_allclose(pred[:, i], manual, atol=1e-12)


class TestAgainstIndependentLassoPath:
    def test_theta_zero_full_path(self):
        rng = np.random.default_rng(14)
        n, p = 50, 30
        X = rng.standard_normal((n, p))
        X -= X.mean(axis=0)
        X /= np.sqrt((X**2).sum(axis=0) / n)
        y = X[:, :4] @ np.array([3.0, -2.0, 1.5, 1.0]) + rng.standard_normal(n)
        y -= y.mean()
        lam_top = lambda_max(X, y)
        lambdas = np.geomspace(lam_top, 0.01 * lam_top, 25)
        cfg = FitConfig(theta=0.0, lambda_grid=lambdas, standardize=False,
                        fit_intercept=False, compute_df=False)
        fit = fit_path(Dataset(X, y), config=cfg)
        ref = ref_lasso_path(X, y, lambdas)
        np.testing.assert_allclose(fit.betas, ref, atol=1e-6)
