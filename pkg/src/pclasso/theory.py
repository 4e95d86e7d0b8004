"""Numeric verification of the augmented-design identities and error bounds.

Conventions.  The bounds are stated for the problem

    minimize (1/2n) ||y~ - X~ beta||^2 + lam * ||beta||_1,
    X~ = [X; sqrt(n*theta) * sqrt(A)],   y~ = [y; 0],

with A the single-group quadratic-penalty matrix of X (p x p convention:
directions outside the row space carry weight d1^2).  Multiplying through by n
maps this onto the solver's objective with ``theta_solver = n * theta`` and
``lambda_solver = n * lam``; helpers here do that conversion.

The restricted-eigenvalue constant gamma is estimated by minimizing the
Rayleigh quotient of X'X/n over random cone probes (plus the realized error
vector, which is what the bound chain actually touches), so each check is the
honest statement "no violation found over probes", not a certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import DataError
from .groups import GroupLayout
from .penalty import GroupPenalty, build_group_penalty
from .solver import Dataset, FitConfig, fit_path

_FIT_TOL = 1e-9


@dataclass
class TheoryInstance:
    """One verification instance: y = X beta* + w with theta on the 1/(2n) scale."""

    X: np.ndarray
    beta_star: np.ndarray
    w: np.ndarray
    theta: float
    lam: float
    penalty: GroupPenalty

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def S(self) -> np.ndarray:
        return np.flatnonzero(self.beta_star)

    @property
    def y(self) -> np.ndarray:
        return self.X @ self.beta_star + self.w

    @property
    def A(self) -> np.ndarray:
        return self.penalty.full_matrix()

    @property
    def d1_sq(self) -> float:
        return self.penalty.d1_sq


def _single_group_penalty(X: np.ndarray) -> GroupPenalty:
    return build_group_penalty(X, GroupLayout.single(X.shape[1]))


def make_instance(
    n: int = 60,
    p: int = 20,
    s: int = 3,
    ntheta: float = 1.0,
    noise_sd: float = 0.5,
    seed: int = 0,
    align_pc1: bool = False,
    zero_noise: bool = False,
    lam: float | None = None,
) -> TheoryInstance:
    """Random instance; ``ntheta`` sets n*theta directly (the scale the bounds use)."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    penalty = _single_group_penalty(X)
    theta = ntheta / n
    if align_pc1:
        v1 = penalty.svds[0].V[:, 0]
        beta_star = 2.0 * v1
    else:
        S = rng.choice(p, size=s, replace=False)
        beta_star = np.zeros(p)
        beta_star[S] = rng.choice([-1.0, 1.0], size=s) * (1.0 + rng.random(s))
    w = np.zeros(n) if zero_noise else noise_sd * rng.standard_normal(n)
    if lam is None:
        A = penalty.full_matrix()
        lam = 2.0 / n * float(np.max(np.abs(X.T @ w - n * theta * (A @ beta_star))))
        if lam <= 0:
            lam = 1e-8 * penalty.d1_sq / n
    return TheoryInstance(X=X, beta_star=beta_star, w=w, theta=theta, lam=lam, penalty=penalty)


# ---------------------------------------------------------------------------
# augmented design and eigenvalue bounds
# ---------------------------------------------------------------------------

def matrix_sqrt(A: np.ndarray) -> np.ndarray:
    vals, vecs = eigh(0.5 * (A + A.T))
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def augment(X: np.ndarray, theta: float, A: np.ndarray | None = None):
    """Stack sqrt(n*theta) * sqrt(A) under X; returns (X_tilde, append_zeros)."""
    n = X.shape[0]
    if A is None:
        A = _single_group_penalty(X).full_matrix()
    X_tilde = np.vstack([X, np.sqrt(n * theta) * matrix_sqrt(A)])

    def y_tilde(y: np.ndarray) -> np.ndarray:
        return np.concatenate([y, np.zeros(X.shape[1])])

    return X_tilde, y_tilde


def gram_identity_error(X: np.ndarray, theta: float, A: np.ndarray | None = None) -> float:
    """max |X~'X~ - (X'X + n theta A)|, which should vanish to rounding."""
    n = X.shape[0]
    if A is None:
        A = _single_group_penalty(X).full_matrix()
    X_tilde, _ = augment(X, theta, A)
    return float(np.max(np.abs(X_tilde.T @ X_tilde - (X.T @ X + n * theta * A))))


def check_unrestricted_bound(X: np.ndarray, theta: float) -> dict:
    """lambda_min(X'X + n theta A) >= min(n theta, 1) * d1^2, checked exactly."""
    n = X.shape[0]
    pen = _single_group_penalty(X)
    A = pen.full_matrix()
    lhs = float(eigh(X.T @ X + n * theta * A, eigvals_only=True)[0])
    rhs = min(n * theta, 1.0) * pen.d1_sq
    margin = lhs - rhs
    return {"ok": bool(margin >= -1e-8 * pen.d1_sq), "lambda_min": lhs, "bound": rhs, "margin": margin}


def sample_cone(
    p: int, S: np.ndarray, cone_factor: float, rng: np.random.Generator
) -> np.ndarray:
    """Random direction with ||nu_{S^c}||_1 <= cone_factor * ||nu_S||_1."""
    nu = np.zeros(p)
    nu[S] = rng.standard_normal(S.size)
    Sc = np.setdiff1d(np.arange(p), S)
    if Sc.size:
        g = rng.standard_normal(Sc.size)
        l1 = np.abs(g).sum()
        if l1 > 0:
            budget = rng.random() * cone_factor * np.abs(nu[S]).sum()
            nu[Sc] = g / l1 * budget
    return nu


def estimate_gamma(
    X: np.ndarray,
    S: np.ndarray,
    cone_factor: float,
    n_probe: int,
    rng: np.random.Generator,
    extra: tuple = (),
) -> tuple[float, np.ndarray]:
    """Probe-based upper envelope of the restricted eigenvalue; returns (gamma, probes)."""
    n, p = X.shape
    probes = [sample_cone(p, S, cone_factor, rng) for _ in range(n_probe)]
    probes += [np.asarray(e) for e in extra if np.linalg.norm(e) > 0]
    gammas = []
    for nu in probes:
        q = float(nu @ (X.T @ (X @ nu)))
        gammas.append(q / (n * float(nu @ nu)))
    return float(min(gammas)), np.array(probes)


def lemma1_bound(n_gamma: float, ntheta: float, d1_sq: float) -> float:
    """min[(1 - n theta) n gamma + n theta d1^2, d1^2]; equals the proof's case split
    because gamma <= d1^2 / n always."""
    return min((1.0 - ntheta) * n_gamma + ntheta * d1_sq, d1_sq)


def check_restricted_bound(
    X: np.ndarray,
    S: np.ndarray,
    theta: float,
    cone_factor: float = 1.0,
    n_probe: int = 100,
    rng: np.random.Generator | None = None,
) -> dict:
    """Every probe satisfies the restricted lower bound with the probe-derived gamma."""
    rng = rng or np.random.default_rng(0)
    n = X.shape[0]
    pen = _single_group_penalty(X)
    A = pen.full_matrix()
    gamma, probes = estimate_gamma(X, S, cone_factor, n_probe, rng)
    bound = lemma1_bound(n * gamma, n * theta, pen.d1_sq)
    worst = np.inf
    M = X.T @ X + n * theta * A
    for nu in probes:
        lhs = float(nu @ (M @ nu))
        margin = lhs - bound * float(nu @ nu)
        worst = min(worst, margin)
    return {
        "ok": bool(worst >= -1e-8 * pen.d1_sq),
        "gamma": gamma,
        "bound": bound,
        "worst_margin": worst,
        "n_probe": len(probes),
    }


# ---------------------------------------------------------------------------
# fits on the theory scale
# ---------------------------------------------------------------------------

def _fit_at(inst: TheoryInstance, lam_solver: float) -> np.ndarray:
    config = FitConfig(
        theta=inst.n * inst.theta,
        lambda_grid=[lam_solver],
        standardize=False,
        fit_intercept=False,
        tol=_FIT_TOL,
    )
    fit = fit_path(
        Dataset(inst.X, inst.y),
        layout=inst.penalty.layout,
        config=config,
        penalty=inst.penalty,
    )
    return fit.betas[:, 0]


def lagrangian_fit(inst: TheoryInstance) -> np.ndarray:
    """Solve the 1/(2n)-scaled problem at the instance's lambda."""
    return _fit_at(inst, inst.n * inst.lam)


def constrained_fit(inst: TheoryInstance, R: float, rel_tol: float = 1e-6) -> np.ndarray:
    """l1-constrained solution via bisection over the lagrangian path.

    Targets ||beta(lam)||_1 = R; when even the unpenalized fit has smaller
    norm the constraint is slack and that fit is returned.
    """
    if R < 0:
        raise DataError("R must be >= 0")
    beta0 = _fit_at(inst, 0.0)
    if np.abs(beta0).sum() <= R:
        return beta0
    from .solver import lambda_max as lam_max_fn

    hi = lam_max_fn(inst.X, inst.y)
    lo = 0.0
    best = np.zeros(inst.p)  # lam = hi is feasible (all-zero solution)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        beta = _fit_at(inst, mid)
        norm = np.abs(beta).sum()
        if norm > R:
            lo = mid
        else:
            # keep the feasible side so the l1 budget is never exceeded
            best = beta
            hi = mid
            if norm >= R * (1 - rel_tol):
                break
    return best


# ---------------------------------------------------------------------------
# error-bound report
# ---------------------------------------------------------------------------

def check_error_bounds(
    inst: TheoryInstance, n_probe: int = 100, rng: np.random.Generator | None = None
) -> dict:
    """Evaluate every applicable error bound on this instance.

    Returns a dict keyed by check name with lhs/rhs/ok entries, covering the
    constrained and lagrangian l2 bounds (restricted and unrestricted
    denominators), both slow-rate prediction bounds and their comparison, the
    fast-rate bound, and the two cone-membership conditions.
    """
    rng = rng or np.random.default_rng(0)
    n, p = inst.n, inst.p
    S = inst.S
    ntheta = n * inst.theta
    d1_sq = inst.d1_sq
    A = inst.A
    hyp = 2.0 / n * float(np.max(np.abs(inst.X.T @ inst.w - n * inst.theta * (A @ inst.beta_star))))
    report: dict[str, dict] = {}

    if inst.lam < hyp * (1 - 1e-12):
        report["hypothesis"] = {"ok": False, "skipped": "lambda below the required level"}
        return report

    sqrt_s = np.sqrt(max(S.size, 1))
    numer = 4.0 * sqrt_s * hyp * n / 2.0  # 4 sqrt(|S|) ||X'w - n theta A beta*||_inf

    # constrained form, R = ||beta*||_1
    beta_c = constrained_fit(inst, float(np.abs(inst.beta_star).sum()))
    nu_c = beta_c - inst.beta_star
    l1_S = np.abs(nu_c[S]).sum()
    l1_Sc = np.abs(nu_c).sum() - l1_S
    report["cone_constrained"] = {
        "lhs": l1_Sc,
        "rhs": l1_S,
        "ok": bool(l1_Sc <= l1_S + 1e-8),
    }
    gamma1, _ = estimate_gamma(inst.X, S, 1.0, n_probe, rng, extra=(nu_c,))
    denom1 = lemma1_bound(n * gamma1, ntheta, d1_sq)
    lhs_c = float(np.linalg.norm(nu_c))
    report["l2_constrained_restricted"] = {
        "lhs": lhs_c,
        "rhs": numer / denom1,
        "ok": bool(lhs_c <= numer / denom1 + 1e-6 * (1 + lhs_c)),
    }
    denom_u = min(ntheta, 1.0) * d1_sq
    report["l2_constrained_unrestricted"] = {
        "lhs": lhs_c,
        "rhs": numer / denom_u,
        "ok": bool(lhs_c <= numer / denom_u + 1e-6 * (1 + lhs_c)),
    }

    # lagrangian form at the instance's lambda
    beta_l = lagrangian_fit(inst)
    nu_l = beta_l - inst.beta_star
    l1_S = np.abs(nu_l[S]).sum()
    l1_Sc = np.abs(nu_l).sum() - l1_S
    report["cone_lagrangian"] = {
        "lhs": l1_Sc,
        "rhs": 3.0 * l1_S,
        "ok": bool(l1_Sc <= 3.0 * l1_S + 1e-8),
    }
    gamma3, _ = estimate_gamma(inst.X, S, 3.0, n_probe, rng, extra=(nu_l,))
    denom3 = lemma1_bound(n * gamma3, ntheta, d1_sq)
    lhs_l = float(np.linalg.norm(nu_l))
    rhs_l = 3.0 * inst.lam * sqrt_s / (denom3 / n)
    report["l2_lagrangian_restricted"] = {
        "lhs": lhs_l,
        "rhs": rhs_l,
        "ok": bool(lhs_l <= rhs_l + 1e-6 * (1 + lhs_l)),
    }
    rhs_lu = 3.0 * inst.lam * sqrt_s / (denom_u / n)
    report["l2_lagrangian_unrestricted"] = {
        "lhs": lhs_l,
        "rhs": rhs_lu,
        "ok": bool(lhs_l <= rhs_lu + 1e-6 * (1 + lhs_l)),
    }

    pred = float(np.linalg.norm(inst.X @ nu_l) ** 2) / n
    l1_star = float(np.abs(inst.beta_star).sum())
    rhs_slow = 12.0 * inst.lam * l1_star
    report["pred_slow"] = {"lhs": pred, "rhs": rhs_slow, "ok": bool(pred <= rhs_slow + 1e-8)}
    kappa = denom_u
    lam = inst.lam
    rhs_slow2 = (
        3.0 * lam * (-lam * p + np.sqrt(lam**2 * p**2 + 32.0 * lam * l1_star * kappa * p))
        / (4.0 * kappa)
    )
    report["pred_slow_kappa"] = {
        "lhs": pred,
        "rhs": rhs_slow2,
        "ok": bool(pred <= rhs_slow2 + 1e-8),
    }
    report["slow_bound_comparison"] = {
        "lhs": rhs_slow2,
        "rhs": rhs_slow,
        "ok": bool(rhs_slow2 <= rhs_slow + 1e-10 * (1 + rhs_slow)),
    }
    rhs_fast = 9.0 * S.size * lam**2 / (denom3 / n)
    report["pred_fast"] = {"lhs": pred, "rhs": rhs_fast, "ok": bool(pred <= rhs_fast + 1e-8)}
    return report


def run_suite(
    seed: int = 0,
    n_gram: int = 20,
    n_eigen: int = 100,
    n_restricted: int = 100,
    n_bounds: int = 50,
    n_probe: int = 100,
) -> dict:
    """Full verification sweep; returns a JSON-serializable report."""
    rng = np.random.default_rng(seed)
    report: dict[str, dict] = {}

    worst = 0.0
    for i in range(n_gram):
        n = int(rng.integers(10, 50))
        p = int(rng.integers(4, 30))
        X = rng.standard_normal((n, p))
        theta = float(rng.choice([0.0, 0.1, 1.0, 10.0])) / n
        worst = max(worst, gram_identity_error(X, theta))
    report["gram_identity"] = {"instances": n_gram, "worst_abs_error": worst, "ok": worst < 1e-10 * 50}

    fails = 0
    worst_margin = np.inf
    for i in range(n_eigen):
        n = int(rng.integers(10, 51))
        p = int(rng.integers(4, 31))
        X = rng.standard_normal((n, p))
        theta = float(rng.choice([0.1, 1.0, 10.0])) / n
        res = check_unrestricted_bound(X, theta)
        fails += not res["ok"]
        worst_margin = min(worst_margin, res["margin"])
    report["eigen_lower_bound"] = {
        "instances": n_eigen,
        "violations": fails,
        "worst_margin": worst_margin,
        "ok": fails == 0,
    }

    fails = 0
    worst_margin = np.inf
    for i in range(n_restricted):
        n = int(rng.integers(20, 61))
        p = int(rng.integers(6, 31))
        X = rng.standard_normal((n, p))
        S = rng.choice(p, size=min(3, p), replace=False)
        theta = float(rng.choice([0.25, 1.0, 4.0])) / n
        res = check_restricted_bound(X, S, theta, cone_factor=1.0, n_probe=n_probe, rng=rng)
        fails += not res["ok"]
        worst_margin = min(worst_margin, res["worst_margin"])
    report["restricted_lower_bound"] = {
        "instances": n_restricted,
        "violations": fails,
        "worst_margin": worst_margin,
        "ok": fails == 0,
    }

    per_check: dict[str, dict] = {}
    for i in range(n_bounds):
        ntheta = [0.25, 1.0, 4.0][i % 3]
        inst = make_instance(n=60, p=20, s=3, ntheta=ntheta, noise_sd=0.5, seed=seed + 1000 + i)
        rep = check_error_bounds(inst, n_probe=n_probe, rng=rng)
        for name, entry in rep.items():
            agg = per_check.setdefault(
                name, {"instances": 0, "violations": 0, "worst_slack": np.inf}
            )
            agg["instances"] += 1
            if "skipped" in entry:
                continue
            agg["violations"] += not entry["ok"]
            agg["worst_slack"] = min(agg["worst_slack"], entry["rhs"] - entry["lhs"])
    for name, agg in per_check.items():
        agg["ok"] = agg["violations"] == 0
    report["error_bounds"] = per_check
    report["ok"] = all(
        section.get("ok", True)
        for section in (report["gram_identity"], report["eigen_lower_bound"], report["restricted_lower_bound"])
    ) and all(a["ok"] for a in per_check.values())
    return report
