"""Column-to-group bookkeeping, including overlapping groups via column replication.

Overlapping group specifications are resolved by replicating every original
column once per group that contains it, so the working design always has
disjoint, contiguous groups.  Fitted coefficients of replicated columns are
summed back into the original columns at output time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class GroupLayout:
    """Assignment of (possibly replicated) design columns to disjoint groups.

    Attributes
    ----------
    column_groups : ndarray of int
        Group id of each expanded column.  Must be sorted non-decreasing so
        each group occupies a contiguous column slice.
    replication_map : ndarray of int
        Original column behind each expanded column; the identity when the
        groups do not overlap.
    n_original : int
        Number of original (pre-replication) columns.
    """

    column_groups: np.ndarray
    replication_map: np.ndarray
    n_original: int

    def __post_init__(self):
        cg = np.asarray(self.column_groups, dtype=np.int64)
        rm = np.asarray(self.replication_map, dtype=np.int64)
        object.__setattr__(self, "column_groups", cg)
        object.__setattr__(self, "replication_map", rm)
        if cg.ndim != 1 or rm.ndim != 1 or cg.shape != rm.shape:
            raise DataError("column_groups and replication_map must be 1-d of equal length")
        if cg.size == 0:
            raise DataError("empty layout")
        if np.any(np.diff(cg) < 0):
            raise DataError("column_groups must be sorted so groups are contiguous")
        ids = np.unique(cg)
        if ids[0] != 0 or ids[-1] != ids.size - 1:
            raise DataError("group ids must be 0..K-1 with every group non-empty")
        if rm.min() < 0 or rm.max() >= self.n_original:
            raise DataError("replication_map entries out of range")
        if np.unique(rm).size != self.n_original:
            raise DataError("replication_map must cover every original column")

    @property
    def n_expanded(self) -> int:
        return int(self.column_groups.size)

    @property
    def n_groups(self) -> int:
        return int(self.column_groups[-1]) + 1

    @property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.column_groups, minlength=self.n_groups)

    @property
    def group_starts(self) -> np.ndarray:
        sizes = self.group_sizes
        return np.concatenate(([0], np.cumsum(sizes)[:-1]))

    @property
    def is_identity(self) -> bool:
        return self.n_expanded == self.n_original and np.array_equal(
            self.replication_map, np.arange(self.n_original)
        )

    def group_slice(self, k: int) -> slice:
        starts = self.group_starts
        sizes = self.group_sizes
        return slice(int(starts[k]), int(starts[k] + sizes[k]))

    @classmethod
    def single(cls, p: int) -> "GroupLayout":
        """All ``p`` columns in one group; no replication."""
        idx = np.arange(p, dtype=np.int64)
        return cls(np.zeros(p, dtype=np.int64), idx, p)

    @classmethod
    def from_group_lists(
        cls, groups: Sequence[Iterable[int]], n_original: int | None = None
    ) -> "GroupLayout":
        """Build a layout from per-group lists of original column indices.

        A column appearing in several groups is replicated.  Columns are laid
        out group by group, preserving the order given within each group.
        """
        cols: list[int] = []
        gids: list[int] = []
        for k, members in enumerate(groups):
            members = list(members)
            if not members:
                raise DataError(f"group {k} is empty")
            cols.extend(int(c) for c in members)
            gids.extend([k] * len(members))
        rm = np.asarray(cols, dtype=np.int64)
        if n_original is None:
            n_original = int(rm.max()) + 1
        return cls(np.asarray(gids, dtype=np.int64), rm, n_original)

    def expand(self, X: np.ndarray) -> np.ndarray:
        """Replicate columns of ``X`` into the expanded layout."""
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.n_original:
            raise DataError(
                f"X has {X.shape[1] if X.ndim == 2 else '?'} columns, layout expects {self.n_original}"
            )
        if self.is_identity:
            return X
        return X[:, self.replication_map]

    def collapse(self, beta_expanded: np.ndarray) -> np.ndarray:
        """Sum expanded-column coefficients back into original columns.

        Accepts a vector of length ``n_expanded`` or a matrix with that many
        rows (one column per path point).
        """
        b = np.asarray(beta_expanded)
        if b.shape[0] != self.n_expanded:
            raise DataError("coefficient array does not match the expanded layout")
        if self.is_identity:
            return b.copy()
        if b.ndim == 1:
            return np.bincount(self.replication_map, weights=b, minlength=self.n_original)
        out = np.zeros((self.n_original,) + b.shape[1:], dtype=b.dtype)
        np.add.at(out, self.replication_map, b)
        return out
