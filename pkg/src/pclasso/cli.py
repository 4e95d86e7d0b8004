"""Command-line front end.

Subcommands: fit, predict, cv, simulate, experiment, df, df-verify,
theory-check, contour.  All randomness is seeded through flags; rerunning a
command reproduces its output byte for byte.  Exit codes: 0 success, 2 usage
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import io
from .crossval import CVConfig, kfold_cv
from .dof import McDfConfig, monte_carlo_df
from .errors import DataError, NumericalError, PclassoError
from .groups import GroupLayout
from .penalty import GroupPenalty, contour_2d
from .simgen import COURTS, SimSpec, generate
from .solver import Dataset, FitConfig, fit_path
from .theory import run_suite

USAGE_EXIT = 2
DATA_EXIT = 3
NUMERIC_EXIT = 4


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--response", required=True, help="name of the response column")
    p.add_argument("--groups", help="group map CSV: original_column,group_id")
    p.add_argument("--weights", help="name of an observation-weight column")
    p.add_argument("--family", choices=["gaussian", "binomial"], default="gaussian")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rat", type=float, help="shrinkage ratio in (0,1]; 1 = lasso (default)")
    g.add_argument("--theta", type=float, help="quadratic penalty weight (alternative to --rat)")
    p.add_argument("--n-lambda", type=int, default=100)
    p.add_argument("--lambda-min-ratio", type=float)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--no-strong-rules", action="store_true")
    p.add_argument("--sqrt-pk", action="store_true", help="scale each group penalty by sqrt(p_k)")
    p.add_argument("--max-rank", type=int, help="truncate each group SVD to this rank")


def _config_from_args(args) -> FitConfig:
    return FitConfig(
        rat=args.rat,
        theta=args.theta,
        n_lambda=args.n_lambda,
        lambda_min_ratio=args.lambda_min_ratio,
        tol=args.tol,
        max_iter=args.max_iter,
        standardize=not args.no_standardize,
        use_strong_rules=not args.no_strong_rules,
        sqrt_pk_scaling=args.sqrt_pk,
        max_rank=args.max_rank,
    )


def _config_dict(args) -> dict:
    return {
        "standardize": not args.no_standardize,
        "sqrt_pk_scaling": args.sqrt_pk,
        "max_rank": args.max_rank,
        "n_lambda": args.n_lambda,
        "lambda_min_ratio": args.lambda_min_ratio,
    }


def _load_dataset(args) -> tuple[Dataset, GroupLayout | None, list]:
    X, y, w, names = io.read_xy(args.data, args.response, args.weights)
    layout = io.read_group_map(args.groups, names) if args.groups else None
    return Dataset(X, y, weights=w, family=args.family), layout, names


def cmd_fit(args) -> int:
    dataset, layout, names = _load_dataset(args)
    config = _config_from_args(args)
    penalty = GroupPenalty.load(args.penalty_in) if args.penalty_in else None
    fit = fit_path(dataset, layout, config, penalty=penalty)
    io.write_json(args.output, io.model_to_dict(fit, names, _config_dict(args)))
    if args.path_csv:
        rows = []
        for i in range(fit.n_lambda):
            rows.append(
                [
                    fit.lambdas[i],
                    fit.df[i] if fit.df is not None else float("nan"),
                    int(fit.active_sets[i].size),
                    fit.objectives[i],
                ]
            )
        io.write_csv(args.path_csv, ["lambda", "df", "n_active", "objective"], rows)
    if args.penalty_out or args.shrinkage_csv:
        pb_layout = layout or GroupLayout.single(dataset.X.shape[1])
        from .solver import _prepare

        prep = _prepare(dataset, pb_layout, config)
        if args.penalty_out:
            io.atomic_write_text(
                args.penalty_out, io.dumps_17g(prep.penalty.to_json_dict()) + "\n"
            )
        if args.shrinkage_csv:
            from .penalty import shrinkage_factors

            rows = []
            for k, svd in enumerate(prep.penalty.svds):
                factors = shrinkage_factors(svd.d, fit.theta)
                for j in range(svd.m):
                    rows.append([k, j, svd.d[j], factors[j]])
            io.write_csv(
                args.shrinkage_csv,
                ["group", "component", "singular_value", "shrinkage_factor"],
                rows,
            )
    return 0


def cmd_predict(args) -> int:
    model = io.load_model(args.model)
    df = io.read_table(args.data)
    missing = [c for c in model["feature_names"] if c not in df.columns]
    if missing:
        raise DataError(f"new data is missing model columns: {missing}")
    X = df[model["feature_names"]].to_numpy(dtype=np.float64)
    betas = io.model_coef_matrix(model)
    intercepts = np.asarray(model["intercepts"], dtype=np.float64)
    lambdas = np.asarray(model["lambda"], dtype=np.float64)
    if args.lambda_index is not None:
        sel = [args.lambda_index]
    elif args.lam is not None:
        sel = [int(np.argmin(np.abs(lambdas - args.lam)))]
    else:
        sel = list(range(lambdas.size))
    eta = intercepts[sel][None, :] + X @ betas[:, sel]
    header = ["row"] + [f"eta_{i}" for i in sel]
    rows = [[r] + list(eta[r]) for r in range(eta.shape[0])]
    if model["family"] == "binomial":
        prob = 1.0 / (1.0 + np.exp(-eta))
        header += [f"prob_{i}" for i in sel]
        rows = [[r] + list(eta[r]) + list(prob[r]) for r in range(eta.shape[0])]
    io.write_csv(args.output, header, rows)
    return 0


def cmd_cv(args) -> int:
    dataset, layout, names = _load_dataset(args)
    config = _config_from_args(args)
    rat_grid = tuple(float(r) for r in args.rat_grid.split(","))
    cv_config = CVConfig(
        n_folds=args.n_folds,
        rat_grid=rat_grid,
        fold_seed=args.fold_seed,
        shared_svd=not args.no_shared_svd,
        selection=args.selection,
    )
    result = kfold_cv(dataset, layout, cv_config, config, threads=args.threads)
    rows = []
    for ri, rat in enumerate(result.rats):
        for li, lam in enumerate(result.lambdas):
            rows.append([rat, lam, result.mean_error[ri, li], result.se_error[ri, li]])
    io.write_csv(args.output_prefix + "_curves.csv", ["rat", "lambda", "mean_error", "se"], rows)
    summary = {
        "criterion": result.criterion,
        "shared_svd": result.shared_svd,
        "selection": result.selection,
        "chosen_rat": result.chosen_rat,
        "chosen_lambda_min": result.chosen_lambda_min,
        "chosen_lambda_1se": result.chosen_lambda_1se,
        "n_folds": args.n_folds,
        "fold_seed": args.fold_seed,
        "rat_grid": list(result.rats),
    }
    io.write_json(args.output_prefix + "_summary.json", summary)
    return 0


def cmd_simulate(args) -> int:
    spec = SimSpec(
        n=args.n,
        sizes=tuple(int(s) for s in args.sizes.split(",")),
        rho=args.rho,
        n_ev=args.n_ev,
        court=args.court,
        snr=args.snr,
        active_groups=tuple(int(g) for g in args.active_groups.split(",")),
        b_value=args.b_value,
        n_test=args.n_test,
        seed=args.seed,
    )
    data = generate(spec)
    names = [f"x{j}" for j in range(spec.p)]
    io.write_csv(
        args.output_prefix + "_train.csv",
        names + ["y"],
        [list(data.X[i]) + [data.y[i]] for i in range(spec.n)],
    )
    if spec.n_test:
        io.write_csv(
            args.output_prefix + "_test.csv",
            names + ["signal"],
            [list(data.X_test[i]) + [data.signal_test[i]] for i in range(spec.n_test)],
        )
    group_rows = []
    starts = np.cumsum((0,) + spec.sizes[:-1])
    for k, (start, size) in enumerate(zip(starts, spec.sizes)):
        for j in range(start, start + size):
            group_rows.append([names[j], k])
    io.write_csv(args.output_prefix + "_groups.csv", ["original_column", "group_id"], group_rows)
    manifest = {
        "n": spec.n,
        "sizes": list(spec.sizes),
        "rho": spec.rho,
        "n_ev": spec.n_ev,
        "court": spec.court,
        "snr": spec.snr,
        "active_groups": list(spec.active_groups),
        "b_value": spec.b_value,
        "n_test": spec.n_test,
        "seed": spec.seed,
        "noise_var": data.noise_var,
        "chosen_eigvec_indices": [
            None if idx is None else [int(i) for i in idx] for idx in data.chosen_indices
        ],
    }
    io.write_json(args.output_prefix + "_manifest.json", manifest)
    return 0


def cmd_experiment(args) -> int:
    from .experiments import METHODS, run_cell

    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"file not found: {args.spec}")
    except json.JSONDecodeError as exc:
        raise DataError(f"could not parse spec JSON: {exc}")
    base = SimSpec(
        n=int(spec["n"]),
        sizes=tuple(int(s) for s in spec["sizes"]),
        n_ev=int(spec.get("n_ev", 1)),
        active_groups=tuple(int(g) for g in spec.get("active_groups", [0])),
        b_value=float(spec.get("b_value", 2.0)),
        n_test=int(spec.get("n_test", 5000)),
    )
    seeds = spec.get("seeds")
    if seeds is None:
        seeds = list(range(int(spec.get("n_seeds", 30))))
    methods = tuple(spec.get("methods", METHODS))
    fit_config = FitConfig(
        n_lambda=int(spec.get("n_lambda", 100)),
        lambda_min_ratio=spec.get("lambda_min_ratio"),
        tol=float(spec.get("tol", 1e-7)),
        compute_df=False,
    )
    cells = []
    for court in spec.get("courts", ["home"]):
        for rho in spec.get("rhos", [0.0]):
            for snr in spec.get("snrs", [1.0]):
                for seed in seeds:
                    cells.append((court, float(rho), float(snr), int(seed)))

    def one(cell):
        court, rho, snr, seed = cell
        cell_spec = replace(base, court=court, rho=rho, snr=snr, seed=seed)
        cv_cfg = CVConfig(
            n_folds=int(spec.get("n_folds", 10)),
            rat_grid=tuple(spec.get("rat_grid", (0.25, 0.5, 0.75, 0.9, 0.95, 1.0))),
            fold_seed=seed,
        )
        return [
            (court, rho, snr, res.seed, res.method, res.mse, res.support_size, res.chosen_rat)
            for res in run_cell(cell_spec, methods, cv_cfg, fit_config)
        ]

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            chunks = list(pool.map(one, cells))
    else:
        chunks = [one(c) for c in cells]
    rows = [row for chunk in chunks for row in chunk]
    io.write_csv(
        args.output,
        ["court", "rho", "snr", "seed", "method", "mse", "support_size", "chosen_rat"],
        rows,
    )
    return 0


def cmd_df(args) -> int:
    model = io.load_model(args.model)
    if model.get("df") is None:
        raise DataError("model has no stored df estimates (binomial fits do not)")
    rows = list(zip(model["lambda"], model["df"]))
    io.write_csv(args.output, ["lambda", "df_hat"], rows)
    return 0


def cmd_df_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    X = rng.standard_normal((args.n, args.p))
    rows = []
    for theta in (float(t) for t in args.theta.split(",")):
        mc = McDfConfig(B=args.B, sigma=args.sigma, seed=args.seed)
        res = monte_carlo_df(
            X, mc, theta, n_lambda=args.n_lambda,
            lambda_min_ratio=args.lambda_min_ratio, threads=args.threads,
        )
        for i in range(res.lambdas.size):
            rows.append(
                [
                    theta,
                    res.lambdas[i],
                    res.df_mc[i],
                    res.mean_df_hat[i],
                    res.ci_lo[i],
                    res.ci_hi[i],
                ]
            )
    io.write_csv(
        args.output, ["theta", "lambda", "df_mc", "mean_df_hat", "ci_lo", "ci_hi"], rows
    )
    return 0


def cmd_theory_check(args) -> int:
    report = run_suite(
        seed=args.seed,
        n_gram=args.n_gram,
        n_eigen=args.n_eigen,
        n_restricted=args.n_restricted,
        n_bounds=args.n_bounds,
        n_probe=args.n_probe,
    )
    io.write_json(args.output, report)
    return 0 if report["ok"] else NUMERIC_EXIT


def cmd_contour(args) -> int:
    xs, ys, pieces = contour_2d(args.lam, args.theta, args.rho, args.level, args.n_points)
    rows = [[xs[i], ys[i], pieces[i]] for i in range(xs.size)]
    io.write_csv(args.output, ["x", "y", "quadrant_piece"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pclasso",
        description="Sparse regression with shrinkage toward leading principal components",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a path and write a model JSON")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--penalty-in", help="reuse a precomputed penalty JSON sidecar")
    p.add_argument("--penalty-out", help="write the penalty precompute to a JSON sidecar")
    p.add_argument("--output", required=True, help="model JSON path")
    p.add_argument("--path-csv", help="also write a per-lambda summary CSV")
    p.add_argument("--shrinkage-csv",
                   help="write per-component shrinkage factors at the fitted theta")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict from a model JSON on new data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda-index", type=int)
    g.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="k-fold cross-validation over (rat, lambda)")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--rat-grid", default="0.25,0.5,0.75,0.9,0.95,1")
    p.add_argument("--n-folds", type=int, default=10)
    p.add_argument("--fold-seed", type=int, default=0)
    p.add_argument("--no-shared-svd", action="store_true")
    p.add_argument("--selection", choices=["min", "1se"], default="min")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("simulate", help="write a synthetic train/test dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sizes", required=True, help="comma-separated group sizes")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--n-ev", type=int, default=1)
    p.add_argument("--court", choices=list(COURTS), default="home")
    p.add_argument("--snr", type=float, default=1.0)
    p.add_argument("--active-groups", default="0")
    p.add_argument("--b-value", type=float, default=2.0)
    p.add_argument("--n-test", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-prefix", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="run a simulation grid described by a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("df", help="emit per-lambda df estimates of a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_df)

    p = sub.add_parser("df-verify", help="Monte-Carlo check of the df estimate")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--B", type=int, default=500)
    p.add_argument("--theta", default="1,10", help="comma-separated theta values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-lambda", type=int, default=20)
    p.add_argument("--lambda-min-ratio", type=float, default=1e-3)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_df_verify)

    p = sub.add_parser("theory-check", help="numeric verification of the error-bound suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-gram", type=int, default=20)
    p.add_argument("--n-eigen", type=int, default=100)
    p.add_argument("--n-restricted", type=int, default=100)
    p.add_argument("--n-bounds", type=int, default=50)
    p.add_argument("--n-probe", type=int, default=100)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_theory_check)

    p = sub.add_parser("contour", help="penalty level set for two standardized predictors")
    p.add_argument("--lam", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--n-points", type=int, default=64)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_contour)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except PclassoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
