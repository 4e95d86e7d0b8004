"""Quadratic penalty built from per-group SVDs, plus the 2-predictor contour geometry.

For a group with right singular vectors ``V`` (p_k x m_k) and singular values
``d``, the penalty block is

    A = d1^2 * I  -  V diag(d_j^2) V^T

which equals ``V diag(d1^2 - d_j^2) V^T`` on the row space and gives weight
``d1^2`` to directions outside it (the rank-deficient case).  The top singular
vector therefore carries zero quadratic weight, and the block is strictly
positive definite on the orthogonal complement of that vector whenever the
group is rank deficient.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateGroupError
from .groups import GroupLayout

#: singular values below RANK_TOL * d1 are treated as zero
RANK_TOL = 1e-10


@dataclass(frozen=True)
class GroupSVD:
    """Thin SVD factors of one group's column block."""

    V: np.ndarray  # (p_k, m_k) orthonormal columns
    d: np.ndarray  # (m_k,) positive, non-increasing

    def __post_init__(self):
        V = np.ascontiguousarray(self.V, dtype=np.float64)
        d = np.ascontiguousarray(self.d, dtype=np.float64)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "d", d)
        if V.ndim != 2 or d.ndim != 1 or V.shape[1] != d.size:
            raise DataError("inconsistent SVD factor shapes")
        if d.size == 0 or d[-1] <= 0:
            raise DegenerateGroupError("degenerate group: no positive singular value")
        if np.any(np.diff(d) > 0):
            raise DataError("singular values must be non-increasing")

    @property
    def p(self) -> int:
        return self.V.shape[0]

    @property
    def m(self) -> int:
        return self.d.size

    @property
    def d1_sq(self) -> float:
        return float(self.d[0] ** 2)


def compute_group_svd(X_k: np.ndarray, max_rank: int | None = None) -> GroupSVD:
    """Thin SVD of one group's (column-centered) block, truncated to numerical rank.

    Singular values below ``RANK_TOL * d1`` are dropped; ``max_rank`` further
    truncates the factorization (cheaper penalty at a small accuracy cost).
    """
    X_k = np.asarray(X_k, dtype=np.float64)
    if X_k.ndim != 2 or X_k.size == 0:
        raise DataError("group block must be a non-empty 2-d array")
    if max_rank is not None and max_rank < 1:
        raise DataError("max_rank must be >= 1")
    _, d, Vt = np.linalg.svd(X_k, full_matrices=False)
    if d.size == 0 or d[0] <= 0:
        raise DegenerateGroupError("degenerate group: no positive singular value")
    keep = d > RANK_TOL * d[0]
    m = int(np.count_nonzero(keep))
    if max_rank is not None:
        m = min(m, int(max_rank))
    return GroupSVD(V=Vt[:m].T, d=d[:m])


def build_penalty_block(
    svd: GroupSVD, sqrt_pk_scaling: bool = False
) -> tuple[np.ndarray, float]:
    """Dense p_k x p_k penalty block for one group and its scale factor.

    Returns the *unscaled* block ``A`` and ``scale`` (``sqrt(p_k)`` when the
    option is on, else 1).  Consumers multiply where needed.
    """
    d_sq = svd.d**2
    A = svd.d1_sq * np.eye(svd.p) - (svd.V * d_sq) @ svd.V.T
    A = 0.5 * (A + A.T)
    scale = float(np.sqrt(svd.p)) if sqrt_pk_scaling else 1.0
    return A, scale


@dataclass(frozen=True)
class GroupPenalty:
    """Per-group penalty blocks plus the global top-two squared singular values.

    Immutable after construction; safe to share across concurrent fits.
    ``d1_sq``/``d2_sq`` come from the full expanded design and drive the
    ``rat`` -> ``theta`` conversion.
    """

    svds: tuple[GroupSVD, ...]
    blocks: tuple[np.ndarray, ...]
    scales: np.ndarray
    d1_sq: float
    d2_sq: float
    layout: GroupLayout

    def __post_init__(self):
        if len(self.svds) != self.layout.n_groups or len(self.blocks) != self.layout.n_groups:
            raise DataError("penalty factors do not match the layout")
        sizes = self.layout.group_sizes
        for k, (svd, A) in enumerate(zip(self.svds, self.blocks)):
            if svd.p != sizes[k] or A.shape != (sizes[k], sizes[k]):
                raise DataError(f"group {k}: block size does not match layout")

    @property
    def n_groups(self) -> int:
        return self.layout.n_groups

    def scaled_block(self, k: int) -> np.ndarray:
        return self.scales[k] * self.blocks[k]

    @property
    def diag(self) -> np.ndarray:
        """Scaled diagonal of the block-diagonal penalty, full expanded length."""
        return np.concatenate(
            [self.scales[k] * np.diag(self.blocks[k]) for k in range(self.n_groups)]
        )

    def full_matrix(self) -> np.ndarray:
        """Dense block-diagonal penalty matrix (scaled).  Desk-scale use only."""
        p = self.layout.n_expanded
        A = np.zeros((p, p))
        for k in range(self.n_groups):
            sl = self.layout.group_slice(k)
            A[sl, sl] = self.scaled_block(k)
        return A

    def abeta(self, beta_expanded: np.ndarray) -> np.ndarray:
        """Block-diagonal product A @ beta in expanded coordinates."""
        out = np.empty_like(beta_expanded, dtype=np.float64)
        for k in range(self.n_groups):
            sl = self.layout.group_slice(k)
            out[sl] = self.scaled_block(k) @ beta_expanded[sl]
        return out

    def quad_form(self, beta_expanded: np.ndarray) -> float:
        """sum_k scale_k * beta_k^T A_k beta_k."""
        total = 0.0
        for k in range(self.n_groups):
            sl = self.layout.group_slice(k)
            bk = beta_expanded[sl]
            total += self.scales[k] * float(bk @ self.blocks[k] @ bk)
        return total

    def flat_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Scaled blocks concatenated row-major, with per-group offsets (for kernels)."""
        flats = [np.ascontiguousarray(self.scaled_block(k)).ravel() for k in range(self.n_groups)]
        offsets = np.zeros(self.n_groups, dtype=np.int64)
        pos = 0
        for k, f in enumerate(flats):
            offsets[k] = pos
            pos += f.size
        return np.concatenate(flats), offsets

    def to_json_dict(self) -> dict:
        return {
            "n_original": self.layout.n_original,
            "column_groups": self.layout.column_groups.tolist(),
            "replication_map": self.layout.replication_map.tolist(),
            "scales": self.scales.tolist(),
            "d1_sq": self.d1_sq,
            "d2_sq": self.d2_sq,
            "groups": [
                {"d": svd.d.tolist(), "V_row_major": svd.V.ravel().tolist(), "p": svd.p}
                for svd in self.svds
            ],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GroupPenalty":
        layout = GroupLayout(
            np.asarray(obj["column_groups"], dtype=np.int64),
            np.asarray(obj["replication_map"], dtype=np.int64),
            int(obj["n_original"]),
        )
        svds = []
        for g in obj["groups"]:
            d = np.asarray(g["d"], dtype=np.float64)
            V = np.asarray(g["V_row_major"], dtype=np.float64).reshape(int(g["p"]), d.size)
            svds.append(GroupSVD(V=V, d=d))
        scales = np.asarray(obj["scales"], dtype=np.float64)
        blocks = tuple(build_penalty_block(svd)[0] for svd in svds)
        return cls(
            svds=tuple(svds),
            blocks=blocks,
            scales=scales,
            d1_sq=float(obj["d1_sq"]),
            d2_sq=float(obj["d2_sq"]),
            layout=layout,
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path) -> "GroupPenalty":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def build_group_penalty(
    X_expanded: np.ndarray,
    layout: GroupLayout,
    sqrt_pk_scaling: bool = False,
    max_rank: int | None = None,
) -> GroupPenalty:
    """SVD each group block of the expanded design and assemble the penalty.

    ``d1_sq``/``d2_sq`` are the top two squared singular values of the *full*
    expanded matrix so one ``rat`` value maps to one ``theta`` shared by all
    groups.
    """
    X_expanded = np.asarray(X_expanded, dtype=np.float64)
    if X_expanded.shape[1] != layout.n_expanded:
        raise DataError("design does not match layout")
    svds = []
    blocks = []
    scales = np.empty(layout.n_groups)
    for k in range(layout.n_groups):
        svd = compute_group_svd(X_expanded[:, layout.group_slice(k)], max_rank=max_rank)
        A, scale = build_penalty_block(svd, sqrt_pk_scaling)
        svds.append(svd)
        blocks.append(A)
        scales[k] = scale
    if layout.n_groups == 1:
        d = svds[0].d
    else:
        d = np.linalg.svd(X_expanded, compute_uv=False)
    d1_sq = float(d[0] ** 2)
    d2_sq = float(d[1] ** 2) if d.size > 1 else 0.0
    return GroupPenalty(
        svds=tuple(svds),
        blocks=tuple(blocks),
        scales=scales,
        d1_sq=d1_sq,
        d2_sq=d2_sq,
        layout=layout,
    )


def rat_to_theta(rat: float, d1_sq: float, d2_sq: float) -> float:
    """Invert the second component's shrinkage factor to recover ``theta``.

    ``rat`` is the shrinkage factor d2^2 / (d2^2 + theta (d1^2 - d2^2)) of the
    second principal component relative to the first (which is always 1), so

        theta = ((1 - rat) / rat) * d2_sq / (d1_sq - d2_sq)

    ``rat = 1`` gives ``theta = 0`` (plain lasso).
    """
    if not 0.0 < rat <= 1.0:
        raise DataError(f"rat must be in (0, 1], got {rat}")
    if not d1_sq >= d2_sq >= 0.0:
        raise DataError("need d1_sq >= d2_sq >= 0")
    if rat == 1.0:
        return 0.0
    gap = d1_sq - d2_sq
    if gap < 1e-12 * d1_sq or d2_sq <= 0.0:
        warnings.warn(
            "top two squared singular values are indistinguishable (or d2=0); "
            "every theta gives the same shrinkage ratio, using theta=0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    return (1.0 - rat) / rat * d2_sq / gap


def shrinkage_factors(d: np.ndarray, theta: float) -> np.ndarray:
    """Per-component factors d_j^2 / (d_j^2 + theta (d1^2 - d_j^2)).

    The fitted values at lam = 0 shrink each principal component's projection
    by these factors; their sum is the fit's degrees of freedom.
    """
    d = np.asarray(d, dtype=np.float64)
    if theta < 0:
        raise DataError("theta must be >= 0")
    d_sq = d**2
    return d_sq / (d_sq + theta * (d_sq[0] - d_sq))


def theta_to_rat(theta: float, d1_sq: float, d2_sq: float) -> float:
    """Shrinkage factor of the second component under ``theta`` (inverse of rat_to_theta)."""
    if theta < 0:
        raise DataError("theta must be >= 0")
    denom = d2_sq + theta * (d1_sq - d2_sq)
    if denom <= 0:
        return 1.0 if theta == 0 else 0.0
    return d2_sq / denom


def penalty_value(
    beta_expanded: np.ndarray, lam: float, theta: float, penalty: GroupPenalty
) -> float:
    """lam * ||beta||_1 + (theta / 2) * sum_k scale_k beta_k^T A_k beta_k."""
    beta_expanded = np.asarray(beta_expanded, dtype=np.float64)
    value = lam * float(np.sum(np.abs(beta_expanded)))
    if theta != 0.0:
        value += 0.5 * theta * penalty.quad_form(beta_expanded)
    return value


# ---------------------------------------------------------------------------
# Two-predictor contour geometry
# ---------------------------------------------------------------------------

def penalty_value_2d(x, y, lam: float, theta: float, rho: float):
    """Penalty for two standardized predictors (unit sum of squares, correlation rho).

    Equals lam*(|x|+|y|) + 2*theta*rho*(x-y)^2 for rho > 0 and
    lam*(|x|+|y|) - 2*theta*rho*(x+y)^2 for rho < 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    l1 = lam * (np.abs(x) + np.abs(y))
    if rho > 0:
        return l1 + 2.0 * theta * rho * (x - y) ** 2
    if rho < 0:
        return l1 - 2.0 * theta * rho * (x + y) ** 2
    return l1


def _diamond(lam: float, level: float, n_points: int):
    c = level / lam
    s = np.linspace(0.0, 1.0, n_points)
    pieces = [
        (c * (1 - s), c * s),      # (+,+): from (c,0) to (0,c)
        (-c * s, c * (1 - s)),     # (-,+)
        (-c * (1 - s), -c * s),    # (-,-)
        (c * s, -c * (1 - s)),     # (+,-)
    ]
    xs = np.concatenate([p[0] for p in pieces])
    ys = np.concatenate([p[1] for p in pieces])
    labels = np.repeat(["++", "-+", "--", "+-"], n_points)
    return xs, ys, labels


def contour_2d(
    lam: float, theta: float, rho: float, level: float, n_points: int = 64
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Points on the level set {beta : penalty(beta) = level} for two predictors.

    Returns ``(x, y, piece)`` arrays tracing the closed curve: in the
    same-sign quadrants the curve is a parabola in rotated coordinates, in the
    mixed-sign quadrants a straight line (signs swap for negative rho).  Each
    emitted point satisfies the penalty equation to machine precision.
    """
    if level <= 0:
        raise DataError("level must be positive")
    if theta < 0 or lam < 0:
        raise DataError("lam and theta must be >= 0")
    if n_points < 2:
        raise DataError("n_points must be >= 2")
    if theta == 0.0 or rho == 0.0:
        if lam <= 0:
            raise DataError("level set is empty or unbounded for lam = 0")
        return _diamond(lam, level, n_points)
    if lam <= 0:
        raise DataError("level set is unbounded for lam = 0 with theta > 0")

    r = abs(rho)
    # axis crossing: lam*z + 2*theta*r*z^2 = level
    z = (-lam + np.sqrt(lam**2 + 8.0 * theta * r * level)) / (4.0 * theta * r)
    # same-sign parabola in rotated coordinates (u along (1,1), t along (1,-1))
    t = np.linspace(-z / np.sqrt(2.0), z / np.sqrt(2.0), n_points)
    u = (level - 4.0 * theta * r * t**2) / (np.sqrt(2.0) * lam)
    para_x = (u + t) / np.sqrt(2.0)
    para_y = (u - t) / np.sqrt(2.0)
    s = np.linspace(0.0, 1.0, n_points)
    line_x = z * (1 - s)
    line_y = -z * s
    xs = np.concatenate([para_x, line_x, -para_x, -line_x])
    ys = np.concatenate([para_y, line_y, -para_y, -line_y])
    if rho < 0:
        ys = -ys
        labels = np.repeat(["+-", "++", "-+", "--"], n_points)
    else:
        labels = np.repeat(["++", "+-", "--", "-+"], n_points)
    return xs, ys, labels
