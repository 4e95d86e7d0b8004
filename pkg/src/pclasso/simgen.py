"""Synthetic grouped-design generator with eigenvector-driven signal.

Each group's rows are iid N(0, Sigma_k) with the equicorrelation matrix
Sigma_k = rho * ones + (1 - rho) * I.  The signal is a linear combination of
right singular vectors of the realized training blocks:

    signal = sum_k X_k W_k b_k

where W_k holds the top (court="home"), uniformly random ("neutral") or bottom
("hostile") ``n_ev`` singular vectors of X_k, and b_k is a constant vector for
active groups and zero otherwise.  Noise variance is set from the population
covariance:  V = sum_k b_k' W_k' Sigma_k W_k b_k / SNR.  Test blocks are fresh
draws from the same distributions, and the test signal reuses the training
eigenvectors.

Randomness comes from a counter-based generator (Philox) with four named
streams spawned from the seed: design, noise, column-choice, test-design.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DataError
from .groups import GroupLayout

COURTS = ("home", "neutral", "hostile")
_STREAMS = ("design", "noise", "columns", "test_design")


@dataclass(frozen=True)
class SimSpec:
    n: int
    sizes: tuple
    rho: float = 0.0
    n_ev: int = 1
    court: str = "home"
    snr: float = 1.0
    active_groups: tuple = (0,)
    b_value: float = 2.0
    n_test: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "active_groups", tuple(int(g) for g in self.active_groups))
        if self.n < 1 or any(s < 1 for s in self.sizes):
            raise DataError("n and all group sizes must be >= 1")
        if not 0.0 <= self.rho < 1.0:
            raise DataError("rho must lie in [0, 1)")
        if self.court not in COURTS:
            raise DataError(f"court must be one of {COURTS}")
        if self.snr <= 0:
            raise DataError("snr must be > 0")
        if self.n_ev < 1 or self.n_ev > min(self.n, min(self.sizes)):
            raise DataError("n_ev must be >= 1 and cannot exceed any group's rank")
        if any(g < 0 or g >= len(self.sizes) for g in self.active_groups):
            raise DataError("active_groups out of range")

    @property
    def n_groups(self) -> int:
        return len(self.sizes)

    @property
    def p(self) -> int:
        return sum(self.sizes)

    def layout(self) -> GroupLayout:
        return GroupLayout.from_group_lists(
            [range(start, start + s) for start, s in zip(np.cumsum((0,) + self.sizes[:-1]), self.sizes)],
            n_original=self.p,
        )


@dataclass
class SimData:
    spec: SimSpec
    X: np.ndarray
    y: np.ndarray
    signal: np.ndarray
    X_test: np.ndarray
    signal_test: np.ndarray
    chosen_indices: list
    noise_var: float
    layout: GroupLayout = field(repr=False, default=None)


def seed_streams(seed: int) -> dict:
    """Named, independently reproducible Philox streams for one spec seed."""
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {
        name: np.random.Generator(np.random.Philox(child))
        for name, child in zip(_STREAMS, children)
    }


def _draw_blocks(rng: np.random.Generator, n: int, sizes: Sequence[int], rho: float):
    """Rows iid N(0, rho*ones + (1-rho)*I), groups mutually independent."""
    blocks = []
    for p_k in sizes:
        shared = rng.standard_normal(n)
        z = rng.standard_normal((n, p_k))
        blocks.append(np.sqrt(1.0 - rho) * z + np.sqrt(rho) * shared[:, None])
    return blocks


def gen_design(spec: SimSpec, rng: np.random.Generator | None = None) -> list:
    """Training design blocks, one (n, p_k) array per group."""
    rng = rng or seed_streams(spec.seed)["design"]
    return _draw_blocks(rng, spec.n, spec.sizes, spec.rho)


def _choose_columns(spec: SimSpec, m_k: int, rng_cols: np.random.Generator) -> np.ndarray:
    if spec.n_ev > m_k:
        raise DataError("n_ev exceeds the realized rank of a group")
    if spec.court == "home":
        return np.arange(spec.n_ev)
    if spec.court == "hostile":
        return np.arange(m_k - spec.n_ev, m_k)
    return np.sort(rng_cols.choice(m_k, size=spec.n_ev, replace=False))


def gen_response(
    spec: SimSpec,
    blocks: Sequence[np.ndarray],
    rng_noise: np.random.Generator | None = None,
    rng_cols: np.random.Generator | None = None,
):
    """(y, signal, noise_var, W_list, chosen_indices) for realized training blocks."""
    if rng_noise is None or rng_cols is None:
        streams = seed_streams(spec.seed)
        rng_noise = rng_noise or streams["noise"]
        rng_cols = rng_cols or streams["columns"]
    signal = np.zeros(spec.n)
    noise_var = 0.0
    W_list: list[np.ndarray | None] = []
    chosen: list[np.ndarray | None] = []
    for k, Xk in enumerate(blocks):
        if k not in spec.active_groups:
            W_list.append(None)
            chosen.append(None)
            continue
        _, d, Vt = np.linalg.svd(Xk, full_matrices=False)
        m_k = int(np.count_nonzero(d > 1e-10 * d[0]))
        idx = _choose_columns(spec, m_k, rng_cols)
        W = Vt[idx].T
        b = np.full(spec.n_ev, spec.b_value)
        signal += Xk @ (W @ b)
        # population covariance: W' (rho*ones + (1-rho)I) W = rho ss' + (1-rho)I
        s = W.T @ np.ones(Xk.shape[1])
        noise_var += spec.rho * float(s @ b) ** 2 + (1.0 - spec.rho) * float(b @ b)
        W_list.append(W)
        chosen.append(idx)
    if noise_var <= 0.0:
        raise DataError("zero-signal SNR undefined: all active coefficients are zero")
    noise_var /= spec.snr
    y = signal + np.sqrt(noise_var) * rng_noise.standard_normal(spec.n)
    return y, signal, noise_var, W_list, chosen


def gen_test(
    spec: SimSpec, W_list: Sequence, rng: np.random.Generator | None = None
):
    """Fresh test blocks from the same Sigma_k; signal uses the training eigenvectors."""
    rng = rng or seed_streams(spec.seed)["test_design"]
    if spec.n_test == 0:
        return np.zeros((0, spec.p)), np.zeros(0)
    blocks = _draw_blocks(rng, spec.n_test, spec.sizes, spec.rho)
    signal = np.zeros(spec.n_test)
    for k, Xk in enumerate(blocks):
        W = W_list[k]
        if W is None:
            continue
        signal += Xk @ (W @ np.full(spec.n_ev, spec.b_value))
    return np.hstack(blocks), signal


def generate(spec: SimSpec) -> SimData:
    """Full draw: train design, response, and test data, deterministic in the seed."""
    streams = seed_streams(spec.seed)
    blocks = gen_design(spec, streams["design"])
    y, signal, noise_var, W_list, chosen = gen_response(
        spec, blocks, streams["noise"], streams["columns"]
    )
    X_test, signal_test = gen_test(spec, W_list, streams["test_design"])
    return SimData(
        spec=spec,
        X=np.hstack(blocks),
        y=y,
        signal=signal,
        X_test=X_test,
        signal_test=signal_test,
        chosen_indices=chosen,
        noise_var=noise_var,
        layout=spec.layout(),
    )
