"""Path solver: cyclic coordinate descent with warm starts and sequential screening.

The working objective, in standardized coordinates, is

    (1/2) sum_i w_i (y_i - x_i' beta)^2 + lam * ||beta||_1
        + (theta/2) * sum_k beta_k' A_k beta_k

with observation weights normalized to sum to n.  Screening discards a
coordinate at lambda_i when its gradient magnitude at the previous solution is
below ``2*lambda_i - lambda_{i-1}``; a full gradient pass after each
working-set solve re-admits any violator, so screening never changes the
solution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import DataError, NumericalError
from .groups import GroupLayout
from .kernels import cd_sweeps
from .penalty import GroupPenalty, build_group_penalty, rat_to_theta, theta_to_rat

PROB_CLAMP = 1e-5  # keeps IRLS weights bounded away from zero


def soft_threshold(z: float, lam: float) -> float:
    """sign(z) * max(|z| - lam, 0)."""
    if lam < 0:
        raise DataError("lam must be >= 0")
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


@dataclass
class Dataset:
    """Design, response, optional observation weights and family tag."""

    X: np.ndarray
    y: np.ndarray
    weights: np.ndarray | None = None
    family: str = "gaussian"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.X.ndim != 2:
            raise DataError("X must be 2-d")
        if self.y.shape != (self.X.shape[0],):
            raise DataError("y length does not match X")
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.y)):
            raise DataError("X and y must be finite (no NaN/Inf)")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != self.y.shape:
                raise DataError("weights length does not match y")
            if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
                raise DataError("weights must be non-negative and finite")
            if self.weights.sum() <= 0:
                raise DataError("weights must have positive sum")
        if self.family not in ("gaussian", "binomial"):
            raise DataError(f"unknown family {self.family!r}")
        if self.family == "binomial" and not np.all(np.isin(self.y, (0.0, 1.0))):
            raise DataError("binomial family requires y in {0, 1}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def norm_weights(self) -> np.ndarray:
        """Weights rescaled to sum to n."""
        if self.weights is None:
            return np.ones(self.n)
        return self.n * self.weights / self.weights.sum()


@dataclass
class FitConfig:
    """Tuning knobs for a path fit.  Exactly one of ``rat``/``theta`` applies."""

    rat: float | None = None
    theta: float | None = None
    lambda_grid: Sequence[float] | None = None
    n_lambda: int = 100
    lambda_min_ratio: float | None = None
    tol: float = 1e-7
    max_iter: int = 100_000
    standardize: bool = True
    fit_intercept: bool = True
    use_strong_rules: bool = True
    sqrt_pk_scaling: bool = False
    max_rank: int | None = None
    compute_df: bool = True
    irls_max_iter: int = 25
    irls_tol: float = 1e-8

    def __post_init__(self):
        if self.rat is not None and self.theta is not None:
            raise DataError("give rat or theta, not both")
        if self.tol <= 0 or self.max_iter < 1:
            raise DataError("tol must be > 0 and max_iter >= 1")
        if self.n_lambda < 1:
            raise DataError("n_lambda must be >= 1")

    def resolve_theta(self, penalty: GroupPenalty) -> tuple[float, float]:
        """(theta, rat) implied by this config and a built penalty."""
        if self.theta is not None:
            if self.theta < 0:
                raise DataError("theta must be >= 0")
            return float(self.theta), theta_to_rat(self.theta, penalty.d1_sq, penalty.d2_sq)
        rat = 1.0 if self.rat is None else float(self.rat)
        return rat_to_theta(rat, penalty.d1_sq, penalty.d2_sq), rat


@dataclass
class PathFit:
    """Solution path over a decreasing lambda grid.

    ``betas``/``intercepts`` live in the original column space (replicated
    columns summed); ``active_sets`` index the expanded, standardized
    coordinates the solver works in.
    """

    lambdas: np.ndarray
    theta: float
    rat: float
    family: str
    layout: GroupLayout
    betas: np.ndarray          # (n_original, L)
    intercepts: np.ndarray     # (L,)
    df: np.ndarray | None
    df_heuristic: bool
    active_sets: list
    n_sweeps: np.ndarray
    converged: np.ndarray
    objectives: np.ndarray
    working_set_sizes: np.ndarray
    n_obs: int
    betas_expanded_std: np.ndarray = field(repr=False)
    x_mean: np.ndarray = field(repr=False)
    x_scale: np.ndarray = field(repr=False)
    y_mean: float = 0.0
    feature_names: list | None = None
    irls_deviances: list | None = None

    @property
    def n_lambda(self) -> int:
        return self.lambdas.size

    def active_sizes(self) -> np.ndarray:
        return np.array([a.size for a in self.active_sets])

    def linear_predictor(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.betas.shape[0]:
            raise DataError("X has the wrong number of columns for this fit")
        return self.intercepts[None, :] + X @ self.betas

    def predict(self, X: np.ndarray, kind: str = "response") -> np.ndarray:
        """Predictions per path point: (n, n_lambda)."""
        eta = self.linear_predictor(X)
        if self.family == "binomial" and kind == "response":
            return expit(eta)
        return eta


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

@dataclass
class _Prepared:
    """Standardized working problem shared across thetas/lambdas (and CV reuse)."""

    X: np.ndarray           # (n, p_exp), fortran order
    Xw: np.ndarray          # X * w[:, None], fortran order
    y: np.ndarray           # centered response (gaussian) or raw y (binomial)
    w: np.ndarray
    v: np.ndarray
    sv: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    layout: GroupLayout
    penalty: GroupPenalty
    adiag: np.ndarray
    ab_flat: np.ndarray
    ab_off: np.ndarray
    grp_of: np.ndarray
    grp_start: np.ndarray
    grp_size: np.ndarray
    lambda_max: float

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def grad_corr(self, r: np.ndarray, abeta: np.ndarray, theta: float) -> np.ndarray:
        """c_j = sum_i w_i x_ij r_i - theta (A beta)_j for all j."""
        c = self.Xw.T @ r
        if theta != 0.0:
            c -= theta * abeta
        return c


def _standardize(X_exp, w, fit_intercept, standardize):
    n = X_exp.shape[0]
    if fit_intercept:
        x_mean = (w @ X_exp) / n
    else:
        x_mean = np.zeros(X_exp.shape[1])
    Xc = X_exp - x_mean
    if standardize:
        x_scale = np.sqrt((w @ (Xc**2)) / n)
        x_scale[x_scale <= 0] = 1.0
    else:
        x_scale = np.ones(X_exp.shape[1])
    Xs = np.asfortranarray(Xc / x_scale)
    return Xs, x_mean, x_scale


def _prepare(
    dataset: Dataset,
    layout: GroupLayout | None,
    config: FitConfig,
    penalty: GroupPenalty | None = None,
) -> _Prepared:
    if layout is None:
        layout = GroupLayout.single(dataset.X.shape[1])
    X_exp = layout.expand(dataset.X)
    w = dataset.norm_weights()
    Xs, x_mean, x_scale = _standardize(X_exp, w, config.fit_intercept, config.standardize)
    Xw = np.asfortranarray(Xs * w[:, None])
    v = np.einsum("ij,ij->j", Xw, Xs)
    sv = np.sqrt(v)
    if penalty is None:
        penalty = build_group_penalty(
            Xs, layout, sqrt_pk_scaling=config.sqrt_pk_scaling, max_rank=config.max_rank
        )
    ab_flat, ab_off = penalty.flat_arrays()
    if dataset.family == "gaussian":
        y_mean = float(w @ dataset.y / dataset.n) if config.fit_intercept else 0.0
        y_work = dataset.y - y_mean
    else:
        y_mean = 0.0
        y_work = dataset.y.copy()
    grad0 = Xw.T @ y_work if dataset.family == "gaussian" else None
    lam_max = float(np.max(np.abs(grad0))) if grad0 is not None else 0.0
    return _Prepared(
        X=Xs,
        Xw=Xw,
        y=y_work,
        w=w,
        v=v,
        sv=sv,
        x_mean=x_mean,
        x_scale=x_scale,
        y_mean=y_mean,
        layout=layout,
        penalty=penalty,
        adiag=penalty.diag,
        ab_flat=ab_flat,
        ab_off=ab_off,
        grp_of=layout.column_groups,
        grp_start=layout.group_starts.astype(np.int64),
        grp_size=layout.group_sizes.astype(np.int64),
        lambda_max=lam_max,
    )


def strong_rule_screen(
    beta_prev: np.ndarray,
    lam: float,
    lam_prev: float,
    X: np.ndarray,
    y: np.ndarray,
    penalty: GroupPenalty,
    theta: float,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Candidate working set for ``lam`` given the solution at ``lam_prev``.

    A coordinate is kept when it fails the sequential discard inequality
    ``|x_j' W (y - X b) - theta (A b)_j| < 2 lam - lam_prev`` or is already
    active.  Expects the centered/standardized working design; screening is a
    heuristic and callers must re-check the KKT conditions of whatever they
    solve on the returned set (fit_path does this internally).
    """
    if lam > lam_prev:
        raise DataError("sequential rule needs lam <= lam_prev")
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    w = np.ones(n) if weights is None else n * np.asarray(weights) / np.sum(weights)
    r = y - X @ beta_prev
    c = X.T @ (w * r)
    if theta != 0.0:
        c = c - theta * penalty.abeta(beta_prev)
    keep = np.abs(c) >= 2.0 * lam - lam_prev
    keep |= beta_prev != 0.0
    return np.flatnonzero(keep)


def lambda_max(X: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Smallest lambda with an all-zero solution: max_j |sum_i w_i x_ij y_i|.

    Expects centered (and, if configured, standardized) inputs; the quadratic
    term contributes no gradient at beta = 0 so the plain lasso formula holds
    for every theta.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.any(X):
        raise DataError("zero design matrix")
    n = X.shape[0]
    w = np.ones(n) if weights is None else n * np.asarray(weights) / np.sum(weights)
    return float(np.max(np.abs(X.T @ (w * y))))


def _lambda_grid(lam_max: float, p: int, n: int, config: FitConfig) -> np.ndarray:
    if config.lambda_grid is not None:
        grid = np.asarray(config.lambda_grid, dtype=np.float64)
        if grid.ndim != 1 or grid.size == 0:
            raise DataError("lambda_grid must be a non-empty 1-d sequence")
        if np.any(np.diff(grid) >= 0):
            raise DataError("lambda_grid must be strictly decreasing")
        if grid[-1] < 0 or (grid.size > 1 and grid[-2] <= 0):
            raise DataError("lambda_grid must be non-negative (only the last entry may be 0)")
        return grid
    if lam_max <= 0:
        raise DataError("lambda_max is zero (response orthogonal to design); supply lambda_grid")
    ratio = config.lambda_min_ratio
    if ratio is None:
        ratio = 1e-2 if p > n else 1e-4
    if config.n_lambda == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, ratio * lam_max, config.n_lambda)


# ---------------------------------------------------------------------------
# single-lambda working-set solve
# ---------------------------------------------------------------------------

def _solve_lambda(
    pb: _Prepared,
    beta: np.ndarray,
    r: np.ndarray,
    abeta: np.ndarray,
    theta: float,
    lam: float,
    lam_prev: float,
    config: FitConfig,
    X=None,
    Xw=None,
    v=None,
    sv=None,
) -> tuple[int, bool, int]:
    """Solve one path point in place; returns (sweeps, converged, working set size)."""
    X = pb.X if X is None else X
    Xw = pb.Xw if Xw is None else Xw
    v = pb.v if v is None else v
    sv = pb.sv if sv is None else sv
    p = beta.size
    if config.use_strong_rules:
        c = Xw.T @ r
        if theta != 0.0:
            c = c - theta * abeta
        keep = np.abs(c) >= 2.0 * lam - lam_prev
        keep |= beta != 0.0
        working = keep
    else:
        working = np.ones(p, dtype=bool)
    total_sweeps = 0
    converged = False
    while True:
        idx = np.flatnonzero(working).astype(np.int64)
        ns, converged, status = cd_sweeps(
            X, Xw, r, beta, abeta, v, sv, pb.adiag, theta, lam, idx,
            pb.ab_flat, pb.ab_off, pb.grp_of, pb.grp_start, pb.grp_size,
            config.tol, config.max_iter,
        )
        if status == 1:
            raise NumericalError(
                "degenerate coordinate: zero curvature with a non-zero gradient"
            )
        total_sweeps += ns
        if working.all():
            break
        c = Xw.T @ r
        if theta != 0.0:
            c = c - theta * abeta
        viol = ~working & (np.abs(c) > lam)
        if not viol.any():
            break
        working |= viol
    return total_sweeps, converged, int(working.sum())


# ---------------------------------------------------------------------------
# gaussian path
# ---------------------------------------------------------------------------

def fit_path(
    dataset: Dataset,
    layout: GroupLayout | None = None,
    config: FitConfig | None = None,
    penalty: GroupPenalty | None = None,
) -> PathFit:
    """Fit the full gaussian path (Algorithm: warm-started coordinate descent)."""
    config = config or FitConfig()
    if dataset.family != "gaussian":
        return fit_logistic_path(dataset, layout, config, penalty)
    pb = _prepare(dataset, layout, config, penalty)
    theta, rat = config.resolve_theta(pb.penalty)
    lambdas = _lambda_grid(pb.lambda_max, pb.p, pb.n, config)
    return _fit_prepared_path(pb, theta, rat, lambdas, config, family="gaussian")


def _fit_prepared_path(
    pb: _Prepared,
    theta: float,
    rat: float,
    lambdas: np.ndarray,
    config: FitConfig,
    family: str,
) -> PathFit:
    p = pb.p
    L = lambdas.size
    beta = np.zeros(p)
    r = pb.y.copy()
    abeta = np.zeros(p)
    betas_std = np.zeros((p, L))
    n_sweeps = np.zeros(L, dtype=np.int64)
    converged = np.zeros(L, dtype=bool)
    objectives = np.zeros(L)
    active_sets: list[np.ndarray] = []
    ws_sizes = np.zeros(L, dtype=np.int64)
    df = np.zeros(L) if config.compute_df else None

    for i, lam in enumerate(lambdas):
        lam_prev = lambdas[i - 1] if i > 0 else pb.lambda_max
        sweeps, conv, ws = _solve_lambda(pb, beta, r, abeta, theta, lam, lam_prev, config)
        n_sweeps[i] = sweeps
        converged[i] = conv
        ws_sizes[i] = ws
        betas_std[:, i] = beta
        active = np.flatnonzero(beta)
        active_sets.append(active)
        objectives[i] = (
            0.5 * float(pb.w @ r**2)
            + lam * float(np.abs(beta).sum())
            + 0.5 * theta * float(beta @ abeta)
        )
        if df is not None:
            df[i] = _df_trace_active(pb, active, theta)
        if not conv:
            warnings.warn(
                f"no convergence at lambda={lam:g} after {sweeps} sweeps", RuntimeWarning
            )

    betas_unstd = betas_std / pb.x_scale[:, None]
    betas = pb.layout.collapse(betas_unstd)
    intercepts = pb.y_mean - pb.x_mean @ betas_unstd
    return PathFit(
        lambdas=np.asarray(lambdas, dtype=np.float64),
        theta=theta,
        rat=rat,
        family=family,
        layout=pb.layout,
        betas=betas,
        intercepts=intercepts,
        df=df,
        df_heuristic=pb.layout.n_groups > 1,
        active_sets=active_sets,
        n_sweeps=n_sweeps,
        converged=converged,
        objectives=objectives,
        working_set_sizes=ws_sizes,
        n_obs=pb.n,
        betas_expanded_std=betas_std,
        x_mean=pb.x_mean,
        x_scale=pb.x_scale,
        y_mean=pb.y_mean,
    )


def _df_trace_active(pb: _Prepared, active: np.ndarray, theta: float) -> float:
    from .dof import df_trace

    if active.size == 0:
        return 0.0
    A_aa = _gather_penalty_sub(pb.penalty, active)
    return df_trace(pb.X[:, active], A_aa, theta)


def _gather_penalty_sub(penalty: GroupPenalty, active: np.ndarray) -> np.ndarray:
    """Block-diagonal penalty restricted to the active rows/columns."""
    layout = penalty.layout
    a = active.size
    out = np.zeros((a, a))
    groups = layout.column_groups[active]
    starts = layout.group_starts
    for k in np.unique(groups):
        pos = np.flatnonzero(groups == k)
        local = active[pos] - starts[k]
        out[np.ix_(pos, pos)] = penalty.scaled_block(int(k))[np.ix_(local, local)]
    return out


# ---------------------------------------------------------------------------
# binomial path (outer IRLS around the weighted gaussian solver)
# ---------------------------------------------------------------------------

def _binomial_deviance(y: np.ndarray, prob: np.ndarray, w: np.ndarray) -> float:
    return -2.0 * float(w @ (y * np.log(prob) + (1.0 - y) * np.log1p(-prob)))


def fit_logistic_path(
    dataset: Dataset,
    layout: GroupLayout | None = None,
    config: FitConfig | None = None,
    penalty: GroupPenalty | None = None,
) -> PathFit:
    """Binomial path: outer reweighted least squares, inner coordinate descent.

    Each outer iteration forms the working response
    ``z = eta + (y - p) / (p (1 - p))`` and weights ``w_i p_i (1 - p_i)``,
    then solves the weighted gaussian subproblem with the intercept handled by
    weighted centering.  Probabilities are clamped to keep the weights bounded.
    """
    config = config or FitConfig()
    if dataset.family != "binomial":
        raise DataError("fit_logistic_path requires a binomial dataset")
    pb = _prepare(dataset, layout, config, penalty)
    theta, rat = config.resolve_theta(pb.penalty)
    y = dataset.y
    w = pb.w
    n, p = pb.n, pb.p

    pbar = float(np.clip(w @ y / n, PROB_CLAMP, 1.0 - PROB_CLAMP))
    eta0 = float(np.log(pbar / (1.0 - pbar))) if config.fit_intercept else 0.0
    # tiny headroom: IRLS re-forms the working response, so the boundary
    # gradient can drift past the null-model value by rounding error
    lam_max = float(np.max(np.abs(pb.Xw.T @ (y - expit(eta0))))) * (1.0 + 1e-10)
    pb.lambda_max = lam_max
    lambdas = _lambda_grid(lam_max, p, n, config)

    L = lambdas.size
    beta = np.zeros(p)
    b0 = eta0
    betas_std = np.zeros((p, L))
    intercept_std = np.zeros(L)
    n_sweeps = np.zeros(L, dtype=np.int64)
    converged = np.zeros(L, dtype=bool)
    objectives = np.zeros(L)
    active_sets: list[np.ndarray] = []
    ws_sizes = np.zeros(L, dtype=np.int64)
    dev_traces: list[np.ndarray] = []

    for i, lam in enumerate(lambdas):
        lam_prev = lambdas[i - 1] if i > 0 else lam_max
        dev_prev = None
        devs = []
        conv = False
        sweeps_total = 0
        ws = 0
        for _ in range(config.irls_max_iter):
            eta = b0 + pb.X @ beta
            prob = np.clip(expit(eta), PROB_CLAMP, 1.0 - PROB_CLAMP)
            dev = _binomial_deviance(y, prob, w)
            devs.append(dev)
            if dev_prev is not None and abs(dev - dev_prev) <= config.irls_tol * (
                abs(dev_prev) + 1e-12
            ):
                conv = True
                break
            dev_prev = dev
            om = w * prob * (1.0 - prob)
            z = eta + (y - prob) / (prob * (1.0 - prob))
            om_sum = om.sum()
            if config.fit_intercept:
                zbar = float(om @ z / om_sum)
                xbar = om @ pb.X / om_sum
            else:
                zbar = 0.0
                xbar = np.zeros(p)
            Xc = np.asfortranarray(pb.X - xbar)
            Xwc = np.asfortranarray(Xc * om[:, None])
            v = np.einsum("ij,ij->j", Xwc, Xc)
            sv = np.sqrt(v)
            rr = (z - zbar) - Xc @ beta
            abeta = pb.penalty.abeta(beta)
            sw, _, wsi = _solve_lambda(
                pb, beta, rr, abeta, theta, lam, lam_prev, config, X=Xc, Xw=Xwc, v=v, sv=sv
            )
            sweeps_total += sw
            ws = max(ws, wsi)
            b0 = zbar - float(xbar @ beta) if config.fit_intercept else 0.0
        if not conv:
            warnings.warn(f"IRLS did not converge at lambda={lam:g}", RuntimeWarning)
        betas_std[:, i] = beta
        intercept_std[i] = b0
        converged[i] = conv
        n_sweeps[i] = sweeps_total
        ws_sizes[i] = ws
        active_sets.append(np.flatnonzero(beta))
        dev_traces.append(np.asarray(devs))
        objectives[i] = (
            0.5 * devs[-1]
            + lam * float(np.abs(beta).sum())
            + 0.5 * theta * pb.penalty.quad_form(beta)
        )

    betas_unstd = betas_std / pb.x_scale[:, None]
    betas = pb.layout.collapse(betas_unstd)
    intercepts = intercept_std - pb.x_mean @ betas_unstd
    return PathFit(
        lambdas=np.asarray(lambdas, dtype=np.float64),
        theta=theta,
        rat=rat,
        family="binomial",
        layout=pb.layout,
        betas=betas,
        intercepts=intercepts,
        df=None,
        df_heuristic=pb.layout.n_groups > 1,
        active_sets=active_sets,
        n_sweeps=n_sweeps,
        converged=converged,
        objectives=objectives,
        working_set_sizes=ws_sizes,
        n_obs=n,
        betas_expanded_std=betas_std,
        x_mean=pb.x_mean,
        x_scale=pb.x_scale,
        y_mean=0.0,
        irls_deviances=dev_traces,
    )


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def kkt_report(dataset: Dataset, fit: PathFit, config: FitConfig | None = None) -> dict:
    """Subgradient certificate for a gaussian path fit.

    For every path point: active coordinates must satisfy
    ``|c_j - lam * sign(beta_j)| ~ 0`` and inactive ones ``|c_j| <= lam``,
    where ``c_j`` is the penalized gradient.  Violations are normalized by the
    data's lambda_max.
    """
    if fit.family != "gaussian":
        raise DataError("kkt_report supports gaussian fits only")
    config = config or FitConfig()
    pb = _prepare(dataset, fit.layout, config, penalty=None)
    active_viol = np.zeros(fit.n_lambda)
    inactive_viol = np.zeros(fit.n_lambda)
    for i in range(fit.n_lambda):
        beta = fit.betas_expanded_std[:, i]
        r = pb.y - pb.X @ beta
        abeta = pb.penalty.abeta(beta)
        c = pb.grad_corr(r, abeta, fit.theta)
        lam = fit.lambdas[i]
        nz = beta != 0
        if nz.any():
            active_viol[i] = np.max(np.abs(c[nz] - lam * np.sign(beta[nz])))
        if (~nz).any():
            inactive_viol[i] = max(0.0, np.max(np.abs(c[~nz])) - lam)
    return {
        "lambda_max": pb.lambda_max,
        "max_active_violation": float(active_viol.max(initial=0.0)),
        "max_inactive_excess": float(inactive_viol.max(initial=0.0)),
        "active_violation": active_viol,
        "inactive_excess": inactive_viol,
    }
