"""Problem-instance representation: grouped designs, standardization, splits."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import (
    ConstantColumn,
    DimensionMismatch,
    GroupingError,
    TooFewRows,
)


class Family(str, Enum):
    """Response family of the smooth loss."""

    gaussian = "gaussian"
    binomial = "binomial"


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GroupPartition:
    """Partition of variables 0..p-1 into m disjoint, non-empty groups.

    Parameters
    ----------
    group_of : array of int, shape (p,)
        Group label of each variable. Labels must cover the contiguous
        range 0..m-1 with every label used at least once.
    """

    group_of: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.group_of)
        if labels.ndim != 1 or labels.size == 0:
            raise GroupingError("group_of must be a non-empty 1-d array")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.floor(labels)):
                raise GroupingError("group labels must be integers")
        labels = labels.astype(np.int64)
        if labels.min() < 0:
            raise GroupingError("group labels must be non-negative")
        counts = np.bincount(labels)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise GroupingError(
                f"group {int(empty[0])} is empty; labels must cover 0..m-1"
            )
        labels.setflags(write=False)
        object.__setattr__(self, "group_of", labels)

    @classmethod
    def from_members(cls, members) -> "GroupPartition":
        """Build a partition from explicit per-group index lists.

        Raises
        ------
        GroupingError
            If the lists overlap, repeat an index, or fail to cover 0..p-1.
        """
        flat = np.concatenate([np.asarray(g, dtype=np.int64) for g in members])
        if flat.size == 0:
            raise GroupingError("empty grouping")
        p = flat.size
        seen = np.zeros(p, dtype=np.int64)
        if flat.min() < 0 or flat.max() >= p:
            raise GroupingError("member indices must lie in 0..p-1")
        np.add.at(seen, flat, 1)
        if np.any(seen != 1):
            bad = int(np.flatnonzero(seen != 1)[0])
            raise GroupingError(f"variable {bad} is not covered exactly once")
        group_of = np.empty(p, dtype=np.int64)
        for g, idx in enumerate(members):
            group_of[np.asarray(idx, dtype=np.int64)] = g
        return cls(group_of)

    @classmethod
    def from_sizes(cls, sizes) -> "GroupPartition":
        """Consecutive groups of the given sizes: [2, 3] -> [0,0,1,1,1]."""
        sizes = np.asarray(sizes, dtype=np.int64)
        if sizes.size == 0 or np.any(sizes < 1):
            raise GroupingError("group sizes must be positive")
        return cls(np.repeat(np.arange(sizes.size), sizes))

    @cached_property
    def n_variables(self) -> int:
        return int(self.group_of.size)

    @cached_property
    def n_groups(self) -> int:
        return int(self.group_of.max()) + 1

    @cached_property
    def sizes(self) -> np.ndarray:
        out = np.bincount(self.group_of, minlength=self.n_groups)
        out.setflags(write=False)
        return out

    @cached_property
    def members(self) -> tuple:
        order = np.argsort(self.group_of, kind="stable")
        bounds = np.cumsum(self.sizes)[:-1]
        return tuple(np.split(order, bounds))

    def group_norms(self, x: np.ndarray) -> np.ndarray:
        """Euclidean norm of x restricted to each group."""
        x = np.asarray(x, dtype=np.float64)
        return np.sqrt(np.bincount(self.group_of, weights=x * x,
                                   minlength=self.n_groups))


@dataclass(frozen=True)
class GroupedDataset:
    """Design matrix, response, grouping, and response family.

    Immutable after construction; arrays are stored read-only so instances
    are safe to share across threads.
    """

    x: np.ndarray
    y: np.ndarray
    partition: GroupPartition
    family: Family = Family.gaussian

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 1:
            raise DimensionMismatch("x must be 2-d and y 1-d")
        if x.shape[0] != y.size:
            raise DimensionMismatch(
                f"x has {x.shape[0]} rows but y has {y.size} entries"
            )
        if x.shape[1] != self.partition.n_variables:
            raise DimensionMismatch(
                f"x has {x.shape[1]} columns but the partition covers "
                f"{self.partition.n_variables} variables"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DimensionMismatch("x and y must be finite")
        family = Family(self.family)
        if family is Family.binomial and not np.all(np.isin(y, (0.0, 1.0))):
            raise DimensionMismatch("binomial responses must be 0/1")
        x = x.copy()
        y = y.copy()
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "family", family)

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    @property
    def n_variables(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class StandardizationRecord:
    """Column centers/scales and the response center used by standardize."""

    column_centers: np.ndarray
    column_scales: np.ndarray
    response_center: float

    def __post_init__(self):
        object.__setattr__(self, "column_centers",
                           _frozen_array(self.column_centers))
        object.__setattr__(self, "column_scales",
                           _frozen_array(self.column_scales))
        if np.any(self.column_scales <= 0):
            raise ConstantColumn(int(np.flatnonzero(
                self.column_scales <= 0)[0]))


def standardize(data: GroupedDataset) -> tuple[GroupedDataset, StandardizationRecord]:
    """Center columns to mean zero and scale them to unit Euclidean norm.

    The Gaussian response is mean-centered as well; a binomial response is
    left untouched. The returned record maps fitted coefficients back to
    the original scale via :func:`unstandardize_coefficients`.

    Raises
    ------
    TooFewRows
        If the dataset has fewer than 2 rows.
    ConstantColumn
        If a column has zero variance.
    """
    if data.n_samples < 2:
        raise TooFewRows("standardize needs at least 2 rows")
    centers = data.x.mean(axis=0)
    centered = data.x - centers
    scales = np.linalg.norm(centered, axis=0)
    col_mag = np.maximum(np.linalg.norm(data.x, axis=0), 1.0)
    dead = np.flatnonzero(scales <= 1e-12 * col_mag)
    if dead.size:
        raise ConstantColumn(int(dead[0]))
    if data.family is Family.gaussian:
        response_center = float(data.y.mean())
    else:
        response_center = 0.0
    out = GroupedDataset(
        x=centered / scales,
        y=data.y - response_center,
        partition=data.partition,
        family=data.family,
    )
    return out, StandardizationRecord(centers, scales, response_center)


def unstandardize_coefficients(
    beta_std: np.ndarray,
    intercept_std: float,
    record: StandardizationRecord,
) -> tuple[np.ndarray, float]:
    """Map standardized-scale coefficients back to the original data scale.

    Predictions on the two scales agree exactly:
    X·beta + intercept == Xs·beta_std + intercept_std + response_center.
    """
    beta_std = np.asarray(beta_std, dtype=np.float64)
    if beta_std.shape != record.column_scales.shape:
        raise DimensionMismatch(
            f"coefficient vector has length {beta_std.size}, record covers "
            f"{record.column_scales.size} columns"
        )
    beta = beta_std / record.column_scales
    intercept = (record.response_center + float(intercept_std)
                 - float(beta @ record.column_centers))
    return beta, intercept


def split(
    data: GroupedDataset, test_fraction: float, seed: int
) -> tuple[GroupedDataset, GroupedDataset]:
    """Deterministic train/test row split sharing the group partition.

    The test set receives round(test_fraction * n) rows; the train set must
    keep at least 2 rows.
    """
    if not 0.0 < test_fraction < 1.0:
        raise TooFewRows("test_fraction must be strictly between 0 and 1")
    n = data.n_samples
    n_test = int(round(test_fraction * n))
    n_test = min(max(n_test, 1), n - 1)
    if n - n_test < 2:
        raise TooFewRows(
            f"split would leave {n - n_test} training rows; need at least 2"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    test_rows = np.sort(perm[:n_test])
    train_rows = np.sort(perm[n_test:])
    make = lambda rows: GroupedDataset(  # noqa: E731 - local helper
        x=data.x[rows], y=data.y[rows],
        partition=data.partition, family=data.family,
    )
    return make(train_rows), make(test_rows)
