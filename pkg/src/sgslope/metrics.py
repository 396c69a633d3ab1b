"""Selection-quality counts and rates at the variable and group levels.

The null convention throughout is max(denominator, 1): an empty selection
has FDR 0, and an empty truth has sensitivity... also 0, never a division
error. Alongside the harmonic-mean F1 we report plain accuracy
(TP+TN)/total, which some summaries quote in its place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import GroupPartition
from .errors import DimensionMismatch


@dataclass(frozen=True)
class ConfusionSummary:
    """Confusion counts for one level of selection plus derived rates."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def selected(self) -> int:
        return self.tp + self.fp

    @property
    def fdr(self) -> float:
        return self.fp / max(self.fp + self.tp, 1)

    @property
    def precision(self) -> float:
        return self.tp / max(self.tp + self.fp, 1)

    @property
    def sensitivity(self) -> float:
        return self.tp / max(self.tp + self.fn, 1)

    @property
    def f1(self) -> float:
        return 2 * self.tp / max(2 * self.tp + self.fp + self.fn, 1)

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / max(self.total, 1)

    @property
    def type1_error_rate(self) -> float:
        return self.fp / max(self.fp + self.tn, 1)


@dataclass(frozen=True)
class SelectionMetrics:
    variable: ConfusionSummary
    group: ConfusionSummary


def confusion_from_sets(true_active, selected, total: int) -> ConfusionSummary:
    """Counts from index sets over a universe of `total` hypotheses."""
    truth = np.zeros(total, dtype=bool)
    truth[np.asarray(true_active, dtype=np.int64)] = True
    picked = np.zeros(total, dtype=bool)
    picked[np.asarray(selected, dtype=np.int64)] = True
    tp = int(np.sum(truth & picked))
    fp = int(np.sum(~truth & picked))
    fn = int(np.sum(truth & ~picked))
    tn = total - tp - fp - fn
    return ConfusionSummary(tp=tp, fp=fp, tn=tn, fn=fn)


def compute_metrics(true_beta, solution, partition: GroupPartition) -> SelectionMetrics:
    """Score a fit's selected variables and groups against the truth.

    A group counts as truly active when any coefficient inside it is
    nonzero.
    """
    true_beta = np.asarray(true_beta, dtype=np.float64)
    if true_beta.shape != (partition.n_variables,):
        raise DimensionMismatch(
            f"truth has {true_beta.shape} coefficients, partition covers "
            f"{partition.n_variables} variables"
        )
    true_vars = np.flatnonzero(true_beta != 0.0)
    true_groups = np.flatnonzero(partition.group_norms(true_beta) > 0.0)
    return SelectionMetrics(
        variable=confusion_from_sets(
            true_vars, solution.selected_variables, partition.n_variables
        ),
        group=confusion_from_sets(
            true_groups, solution.selected_groups, partition.n_groups
        ),
    )
