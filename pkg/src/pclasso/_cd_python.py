"""Pure-python coordinate-descent sweep kernel (fallback for the compiled one).

Same contract as ``pclasso._cd_kernel.cd_sweeps``: cycle over the coordinates
listed in ``idx`` until the largest scaled coordinate change in one full cycle
drops below ``tol``.  ``X`` holds the working design (Fortran order), ``Xw``
the same columns pre-multiplied by the normalized observation weights, ``r``
the current residual, ``abeta`` the block-diagonal penalty product A @ beta.
``r``, ``beta`` and ``abeta`` are updated in place.

Returns ``(n_sweeps, converged, status)`` with status 1 signalling a
degenerate coordinate (zero curvature but non-zero gradient).
"""

from __future__ import annotations

import numpy as np


def cd_sweeps(
    X: np.ndarray,
    Xw: np.ndarray,
    r: np.ndarray,
    beta: np.ndarray,
    abeta: np.ndarray,
    v: np.ndarray,
    sv: np.ndarray,
    adiag: np.ndarray,
    theta: float,
    lam: float,
    idx: np.ndarray,
    ab_flat: np.ndarray,
    ab_off: np.ndarray,
    grp_of: np.ndarray,
    grp_start: np.ndarray,
    grp_size: np.ndarray,
    tol: float,
    max_sweeps: int,
) -> tuple[int, bool, int]:
    for sweep in range(max_sweeps):
        max_change = 0.0
        for j in idx:
            b_j = beta[j]
            # numerator of the update: weighted gradient on the partial residual
            z = Xw[:, j] @ r + v[j] * b_j - theta * (abeta[j] - adiag[j] * b_j)
            denom = v[j] + theta * adiag[j]
            az = abs(z)
            if az <= lam:
                new = 0.0
            elif denom <= 0.0:
                return sweep, False, 1
            else:
                new = (z - lam if z > 0 else z + lam) / denom
            delta = new - b_j
            if delta != 0.0:
                beta[j] = new
                r -= delta * X[:, j]
                k = grp_of[j]
                g0 = grp_start[k]
                pk = grp_size[k]
                base = ab_off[k] + (j - g0) * pk
                abeta[g0 : g0 + pk] += delta * ab_flat[base : base + pk]
                change = abs(delta) * sv[j]
                if change > max_change:
                    max_change = change
        if max_change < tol:
            return sweep + 1, True, 0
    return max_sweeps, False, 0
