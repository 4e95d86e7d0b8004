import json
import os

import numpy as np
import pytest

from pclasso import Dataset, FitConfig, fit_path
from pclasso.cli import main
from pclasso.io import dumps_17g, read_group_map, read_xy, write_csv


def write_training_csv(path, X, y, names=None):
    names = names or [f"x{j}" for j in range(X.shape[1])]
    rows = [list(X[i]) + [y[i]] for i in range(X.shape[0])]
    write_csv(path, names + ["y"], rows)
    return names


@pytest.fixture
def tiny_data(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 5))
    y = X[:, 0] * 2 - X[:, 2] + 0.3 * rng.standard_normal(40)
    path = tmp_path / "train.csv"
    write_training_csv(path, X, y)
    return path, X, y


class TestIo:
    def test_float_formatting_round_trip(self):
        x = 0.1 + 0.2
        s = dumps_17g({"v": x})
        assert json.loads(s)["v"] == x

    def test_nan_serialization(self):
        assert json.loads(dumps_17g({"v": float("nan")}))["v"] != 0  # NaN parses

    def test_read_xy(self, tiny_data):
        path, X, y = tiny_data
        X2, y2, w, names = read_xy(str(path), "y")
        np.testing.assert_allclose(X2, X, atol=1e-15)
        np.testing.assert_allclose(y2, y, atol=1e-15)
        assert w is None and names == [f"x{j}" for j in range(5)]

    def test_missing_response_rejected(self, tiny_data):
        path, _, _ = tiny_data
        from pclasso import DataError

        with pytest.raises(DataError, match="response"):
            read_xy(str(path), "target")

    def test_na_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,y\n1,2,3\n4,,6\n")
        from pclasso import DataError

        with pytest.raises(DataError, match="NA"):
            read_xy(str(p), "y")

    def test_group_map_with_overlap(self, tmp_path):
        p = tmp_path / "groups.csv"
        p.write_text("original_column,group_id\nx0,0\nx1,0\nx1,1\nx2,1\n")
        layout = read_group_map(str(p), ["x0", "x1", "x2"])
        assert layout.n_expanded == 4
        assert layout.n_original == 3
        assert not layout.is_identity

    def test_group_map_unknown_column(self, tmp_path):
        p = tmp_path / "groups.csv"
        p.write_text("original_column,group_id\nzz,0\n")
        from pclasso import DataError

        with pytest.raises(DataError, match="zz"):
            read_group_map(str(p), ["x0"])


class TestCliFit:
    def test_fit_writes_model_and_path_csv(self, tiny_data, tmp_path):
        path, X, y = tiny_data
        model = tmp_path / "model.json"
        pcsv = tmp_path / "path.csv"
        rc = main(["fit", "--data", str(path), "--response", "y", "--rat", "0.9",
                   "--n-lambda", "20", "--output", str(model), "--path-csv", str(pcsv)])
        assert rc == 0
        obj = json.loads(model.read_text())
        assert obj["family"] == "gaussian"
        assert len(obj["lambda"]) == 20
        assert obj["df"] is not None
        lines = pcsv.read_text().strip().splitlines()
        assert lines[0] == "lambda,df,n_active,objective"
        assert len(lines) == 21

    def test_fit_rat_one_equals_lasso_engine(self, tiny_data, tmp_path):
        path, X, y = tiny_data
        model = tmp_path / "model.json"
        rc = main(["fit", "--data", str(path), "--response", "y",
                   "--n-lambda", "12", "--output", str(model)])
        assert rc == 0
        obj = json.loads(model.read_text())
        fit = fit_path(Dataset(X, y), config=FitConfig(theta=0.0, n_lambda=12))
        from pclasso.io import model_coef_matrix

        np.testing.assert_allclose(model_coef_matrix(obj), fit.betas, atol=1e-10)

    def test_missing_group_map_errors_without_output(self, tiny_data, tmp_path):
        path, _, _ = tiny_data
        model = tmp_path / "model.json"
        rc = main(["fit", "--data", str(path), "--response", "y",
                   "--groups", str(tmp_path / "nope.csv"), "--output", str(model)])
        assert rc == 3
        assert not model.exists()

    def test_reruns_are_byte_identical(self, tiny_data, tmp_path):
        path, _, _ = tiny_data
        m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
        args = ["fit", "--data", str(path), "--response", "y", "--rat", "0.5",
                "--n-lambda", "10"]
        assert main(args + ["--output", str(m1)]) == 0
        assert main(args + ["--output", str(m2)]) == 0
        assert m1.read_bytes() == m2.read_bytes()

    def test_penalty_sidecar_round_trip(self, tiny_data, tmp_path):
        path, _, _ = tiny_data
        m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
        sidecar = tmp_path / "penalty.json"
        base = ["fit", "--data", str(path), "--response", "y", "--rat", "0.5",
                "--n-lambda", "8"]
        assert main(base + ["--output", str(m1), "--penalty-out", str(sidecar)]) == 0
        assert main(base + ["--output", str(m2), "--penalty-in", str(sidecar)]) == 0
        assert json.loads(m1.read_text())["betas"] == json.loads(m2.read_text())["betas"]


class TestCliPredict:
    def test_round_trip_matches_in_memory(self, tiny_data, tmp_path):
        path, X, y = tiny_data
        model = tmp_path / "model.json"
        preds = tmp_path / "preds.csv"
        main(["fit", "--data", str(path), "--response", "y", "--rat", "0.8",
              "--n-lambda", "10", "--output", str(model)])
        rc = main(["predict", "--model", str(model), "--data", str(path),
                   "--lambda-index", "6", "--output", str(preds)])
        assert rc == 0
        fit = fit_path(Dataset(X, y), config=FitConfig(rat=0.8, n_lambda=10))
        got = np.loadtxt(preds, delimiter=",", skiprows=1)[:, 1]
        np.testing.assert_allclose(got, fit.predict(X)[:, 6], atol=1e-10)

    def test_missing_columns_listed(self, tiny_data, tmp_path):
        path, X, y = tiny_data
        model = tmp_path / "model.json"
        main(["fit", "--data", str(path), "--response", "y", "--output", str(model),
              "--n-lambda", "5"])
        bad = tmp_path / "bad.csv"
        write_csv(bad, ["x0", "x1"], [[1.0, 2.0]])
        rc = main(["predict", "--model", str(model), "--data", str(bad),
                   "--output", str(tmp_path / "p.csv")])
        assert rc == 3

    def test_binomial_probabilities(self, tmp_path):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((50, 3))
        y = (rng.random(50) < 0.5).astype(float)
        train = tmp_path / "train.csv"
        write_training_csv(train, X, y)
        model = tmp_path / "model.json"
        main(["fit", "--data", str(train), "--response", "y", "--family", "binomial",
              "--n-lambda", "5", "--output", str(model)])
        preds = tmp_path / "preds.csv"
        rc = main(["predict", "--model", str(model), "--data", str(train),
                   "--lambda-index", "3", "--output", str(preds)])
        assert rc == 0
        table = np.loadtxt(preds, delimiter=",", skiprows=1)
        prob = table[:, 2]
        assert np.all((prob > 0) & (prob < 1))


class TestCliOthers:
    def test_cv_outputs(self, tiny_data, tmp_path):
        path, _, _ = tiny_data
        prefix = str(tmp_path / "cv")
        rc = main(["cv", "--data", str(path), "--response", "y",
                   "--rat-grid", "0.5,1", "--n-folds", "3", "--n-lambda", "8",
                   "--output-prefix", prefix])
        assert rc == 0
        summary = json.loads((tmp_path / "cv_summary.json").read_text())
        assert summary["chosen_rat"] in (0.5, 1.0)
        lines = (tmp_path / "cv_curves.csv").read_text().strip().splitlines()
        assert lines[0] == "rat,lambda,mean_error,se"
        assert len(lines) == 1 + 2 * 8

    def test_simulate_and_fit_on_output(self, tmp_path):
        prefix = str(tmp_path / "sim")
        rc = main(["simulate", "--n", "50", "--sizes", "5,5", "--n-ev", "1",
                   "--court", "home", "--snr", "2", "--n-test", "10",
                   "--seed", "3", "--output-prefix", prefix])
        assert rc == 0
        manifest = json.loads((tmp_path / "sim_manifest.json").read_text())
        assert manifest["noise_var"] > 0
        model = tmp_path / "model.json"
        rc = main(["fit", "--data", prefix + "_train.csv", "--response", "y",
                   "--groups", prefix + "_groups.csv", "--rat", "0.5",
                   "--n-lambda", "6", "--output", str(model)])
        assert rc == 0

    def test_experiment_runs_small_grid(self, tmp_path):
        spec = {
            "n": 40, "sizes": [5, 5], "n_ev": 1, "active_groups": [0],
            "n_test": 50, "courts": ["home"], "rhos": [0.0], "snrs": [1.0],
            "seeds": [0, 1], "methods": ["lasso-min", "null"],
            "n_folds": 3, "n_lambda": 8, "rat_grid": [1.0],
        }
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        out = tmp_path / "results.csv"
        rc = main(["experiment", "--spec", str(spec_path), "--output", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 2 * 2
        # threaded run produces identical bytes
        out2 = tmp_path / "results2.csv"
        rc = main(["experiment", "--spec", str(spec_path), "--threads", "2",
                   "--output", str(out2)])
        assert rc == 0
        assert out.read_bytes() == out2.read_bytes()

    def test_df_subcommand(self, tiny_data, tmp_path):
        path, _, _ = tiny_data
        model = tmp_path / "model.json"
        main(["fit", "--data", str(path), "--response", "y", "--theta", "1.0",
              "--n-lambda", "7", "--output", str(model)])
        out = tmp_path / "df.csv"
        rc = main(["df", "--model", str(model), "--output", str(out)])
        assert rc == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "lambda,df_hat"
        assert len(lines) == 8

    def test_df_verify_small(self, tmp_path):
        out = tmp_path / "dfv.csv"
        rc = main(["df-verify", "--n", "40", "--p", "5", "--B", "10",
                   "--theta", "1", "--n-lambda", "4", "--output", str(out)])
        assert rc == 0
        assert out.read_text().startswith("theta,lambda,df_mc,mean_df_hat,ci_lo,ci_hi")

    def test_theory_check_small(self, tmp_path):
        out = tmp_path / "report.json"
        rc = main(["theory-check", "--n-gram", "3", "--n-eigen", "3",
                   "--n-restricted", "2", "--n-bounds", "3", "--n-probe", "20",
                   "--output", str(out)])
        assert rc == 0
        assert json.loads(out.read_text())["ok"] is True

    def test_contour_points_satisfy_equation(self, tmp_path):
        out = tmp_path / "contour.csv"
        rc = main(["contour", "--lam", "1.0", "--theta", "2.0", "--rho", "0.5",
                   "--level", "3.0", "--n-points", "16", "--output", str(out)])
        assert rc == 0
        rows = [line.split(",") for line in out.read_text().strip().splitlines()[1:]]
        xs = np.array([float(r[0]) for r in rows])
        ys = np.array([float(r[1]) for r in rows])
        pen = 1.0 * (np.abs(xs) + np.abs(ys)) + 2 * 2.0 * 0.5 * (xs - ys) ** 2
        np.testing.assert_allclose(pen, 3.0, atol=1e-8)

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as err:
            main(["fit", "--data"])
        assert err.value.code == 2
