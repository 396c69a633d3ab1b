"""Penalty weight sequences controlling variable- and group-level FDR.

Six generators are provided. The plain sorted-L1 (BH-type) and the two
group-only sequences carry no dependence on the regularization scale; the
four bi-level sequences (vmax/gmax and their averaged mean forms) do, via
the `lam` argument. `lam` here is the *theorem-scale* multiplier: at
lam=1 the generators reproduce the unscaled forms. `build_penalty_spec`
converts a fit-scale lambda (the one that multiplies the penalty next to a
1/(2n)-scaled loss) into the theorem scale via its `n_samples` argument.

Per-group conventions, applied everywhere a formula consults "group j":

* the candidate set ranges over distinct group sizes, each weighted by its
  multiplicity when averaging;
* a candidate of size d uses the top d variable weights (v_1..v_d), the
  mass the highest-ranking group of that size would carry;
* a candidate of size d uses the group weight at its size-class bottom
  rank (groups ordered by size descending). Within a class the weights
  only decrease, so that rank is where a maximum taken over individual
  groups lands, and uniform sizes still leave one candidate per class,
  keeping the mean forms equal to the max forms there;
* the active-variable count per group is estimated as max(1, floor(alpha*d)).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import chi, norm

from .data import GroupPartition
from .distributions import (
    chi_quantile,
    folded_sum_cdf,
    folded_sum_quantile,
    normal_quantile,
)
from .errors import AlphaOutOfRange, InvalidFdrLevel, RootBracketFailure
from .prox import check_weights

_BISECT_MAX_ITER = 200
_BISECT_WIDTH = 1e-12


class VariableKind(str, Enum):
    bh = "bh"
    vmax = "vmax"
    vmean = "vmean"


class GroupKind(str, Enum):
    gslope_max = "gslope-max"
    gslope_mean = "gslope-mean"
    gmax = "gmax"
    gmean = "gmean"


@dataclass(frozen=True)
class SortedWeights:
    """Non-negative, non-increasing penalty weight vector."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        check_weights(vals, vals.size)
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __array__(self, dtype=None, copy=None):
        return self.values.astype(dtype) if dtype else self.values

    def __len__(self):
        return self.values.size

    def __getitem__(self, item):
        return self.values[item]


@dataclass(frozen=True)
class PenaltySpec:
    """Fully resolved penalty: mixing weight, scale, and both sequences."""

    alpha: float
    lam: float
    q_v: float
    q_g: float
    variable_kind: VariableKind
    group_kind: GroupKind
    v: SortedWeights
    w: SortedWeights

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise AlphaOutOfRange("alpha must lie in [0, 1]")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")

    def effective_variable_weights(self) -> np.ndarray:
        """lambda * alpha * v: what multiplies the sorted |b| terms."""
        return self.lam * self.alpha * self.v.values

    def effective_group_weights(self) -> np.ndarray:
        """lambda * (1-alpha) * w: what multiplies sqrt(p_g)*||b^(g)||."""
        return self.lam * (1.0 - self.alpha) * self.w.values


def _check_fdr(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise InvalidFdrLevel(f"target FDR must be in (0, 1), got {q}")


def _check_lambda(lam: float) -> None:
    if lam <= 0:
        raise ValueError("lambda must be positive")


def _monotone(raw: np.ndarray) -> SortedWeights:
    # Clip negatives, then repair float-level monotonicity fuzz left by
    # independent per-index root solves.
    return SortedWeights(np.minimum.accumulate(np.maximum(raw, 0.0)))


def _size_classes(partition: GroupPartition):
    """Distinct sizes (descending), multiplicities, and the 0-based weight
    index of each size class's top rank."""
    sizes = np.sort(partition.sizes)[::-1]
    distinct, first = np.unique(-sizes, return_index=True)
    return -distinct, np.diff(np.append(first, sizes.size)), first


def _active_counts(alpha: float, sizes: np.ndarray) -> np.ndarray:
    return np.maximum(1.0, np.floor(alpha * sizes.astype(np.float64)))


def _bisect_increasing(evaluate, targets: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Roots of evaluate(x) = target, elementwise, for increasing evaluate.

    `hi` must satisfy evaluate(hi) >= target (it is grown a few times if
    not, then RootBracketFailure). Roots at or below zero return 0.
    """
    targets = np.asarray(targets, dtype=np.float64)
    hi = np.maximum(np.asarray(hi, dtype=np.float64), 0.0)
    at_zero = evaluate(np.zeros_like(targets)) >= targets
    hi = np.where(at_zero, 0.0, hi)
    for _ in range(64):
        short = ~at_zero & (evaluate(hi) < targets)
        if not np.any(short):
            break
        hi = np.where(short, np.maximum(hi, 0.5) * 2.0, hi)
    else:
        raise RootBracketFailure("could not bracket a sequence root")
    lo = np.zeros_like(hi)
    for _ in range(_BISECT_MAX_ITER):
        if np.all(hi - lo <= _BISECT_WIDTH):
            break
        mid = 0.5 * (lo + hi)
        below = evaluate(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return np.where(at_zero, 0.0, 0.5 * (lo + hi))


def slope_bh_sequence(p: int, q_v: float) -> SortedWeights:
    """BH-type sorted-L1 sequence: v_i = normal quantile of 1 - q_v*i/(2p)."""
    _check_fdr(q_v)
    if p < 1:
        raise ValueError("p must be >= 1")
    i = np.arange(1, p + 1, dtype=np.float64)
    return SortedWeights(normal_quantile(1.0 - q_v * i / (2.0 * p)))


def gslope_max_sequence(partition: GroupPartition, q_g: float) -> SortedWeights:
    """Group sequence from per-size chi quantiles, maximized over sizes."""
    _check_fdr(q_g)
    m = partition.n_groups
    i = np.arange(1, m + 1, dtype=np.float64)
    probs = 1.0 - q_g * i / m
    sizes, _, _ = _size_classes(partition)
    cands = np.stack(
        [chi_quantile(probs, int(d)) / np.sqrt(d) for d in sizes], axis=1
    )
    return _monotone(cands.max(axis=1))


def gslope_mean_sequence(partition: GroupPartition, q_g: float) -> SortedWeights:
    """Group sequence inverting the size-averaged chi CDF.

    Each w_i solves (1/m) * sum_j F_chi(sqrt(p_j) * w_i; p_j) = 1 - q_g*i/m.
    Equals the max form when all groups share one size.
    """
    _check_fdr(q_g)
    m = partition.n_groups
    i = np.arange(1, m + 1, dtype=np.float64)
    targets = 1.0 - q_g * i / m
    sizes, counts, _ = _size_classes(partition)
    roots = np.sqrt(sizes.astype(np.float64))

    def averaged(x):
        acc = np.zeros_like(x)
        for d, c, r in zip(sizes, counts, roots):
            acc += c * chi.cdf(r * x, int(d))
        return acc / m

    hi = np.stack(
        [chi_quantile(targets, int(d)) / r for d, r in zip(sizes, roots)], axis=1
    ).max(axis=1) * 2.0
    return _monotone(_bisect_increasing(averaged, targets, hi))


def sgs_vmax_sequence(
    partition: GroupPartition, alpha: float, lam: float, q_v: float, w
) -> SortedWeights:
    """Variable sequence of the bi-level max form.

    v_i = max over size classes of
        (normal_quantile(1 - q_v*i/2p) - (1/3)(1-alpha)*lam*a_c*w_c) / (alpha*lam)
    clipped at zero. Requires alpha > 0; at alpha = 1 this is the BH
    sequence divided by lam.
    """
    _check_fdr(q_v)
    _check_lambda(lam)
    if not 0.0 < alpha <= 1.0:
        raise AlphaOutOfRange("vmax needs 0 < alpha <= 1")
    w = check_weights(w, partition.n_groups)
    p = partition.n_variables
    i = np.arange(1, p + 1, dtype=np.float64)
    base = normal_quantile(1.0 - q_v * i / (2.0 * p))
    sizes, counts, top = _size_classes(partition)
    shifts = (
        (1.0 - alpha) * lam * _active_counts(alpha, sizes)
        * w[top + counts - 1] / 3.0
    )
    cands = (base[:, None] - shifts[None, :]) / (alpha * lam)
    return _monotone(cands.max(axis=1))


def sgs_vmean_sequence(
    partition: GroupPartition, alpha: float, lam: float, q_v: float, w
) -> SortedWeights:
    """Variable sequence of the bi-level mean form.

    Each v_i solves
        (1/m) * sum_j F_N(alpha*lam*v_i + (1/3)(1-alpha)*lam*a_j*w_j)
            = 1 - q_v*i/(2p)
    over the size-class candidates. Equals the max form when all
    candidates are identical (uniform group sizes).
    """
    _check_fdr(q_v)
    _check_lambda(lam)
    if not 0.0 < alpha <= 1.0:
        raise AlphaOutOfRange("vmean needs 0 < alpha <= 1")
    w = check_weights(w, partition.n_groups)
    p = partition.n_variables
    m = partition.n_groups
    i = np.arange(1, p + 1, dtype=np.float64)
    targets = 1.0 - q_v * i / (2.0 * p)
    sizes, counts, top = _size_classes(partition)
    shifts = (
        (1.0 - alpha) * lam * _active_counts(alpha, sizes)
        * w[top + counts - 1] / 3.0
    )

    def averaged(x):
        acc = np.zeros_like(x)
        for c, s in zip(counts, shifts):
            acc += c * norm.cdf(alpha * lam * x + s)
        return acc / m

    base = normal_quantile(targets)
    hi = ((base[:, None] - shifts[None, :]) / (alpha * lam)).max(axis=1) * 2.0
    return _monotone(_bisect_increasing(averaged, targets, hi))


def sgs_gmax_sequence(
    partition: GroupPartition, alpha: float, lam: float, q_g: float, v
) -> SortedWeights:
    """Group sequence of the bi-level max form.

    w_i = max over size classes of
        (folded_sum_quantile(1 - q_g*i/m; d) - alpha*lam*sum(v_1..v_d))
            / ((1-alpha)*lam*d)
    clipped at zero. Requires alpha < 1; at alpha = 0 this is the pure
    folded-sum group sequence scaled by 1/lam.
    """
    _check_fdr(q_g)
    _check_lambda(lam)
    if not 0.0 <= alpha < 1.0:
        raise AlphaOutOfRange("gmax needs 0 <= alpha < 1")
    v = check_weights(v, partition.n_variables)
    m = partition.n_groups
    i = np.arange(1, m + 1, dtype=np.float64)
    probs = 1.0 - q_g * i / m
    sizes, _, _ = _size_classes(partition)
    topsum = np.concatenate(([0.0], np.cumsum(v)))
    cands = np.stack(
        [
            (folded_sum_quantile(probs, int(d)) - alpha * lam * topsum[int(d)])
            / ((1.0 - alpha) * lam * d)
            for d in sizes
        ],
        axis=1,
    )
    return _monotone(cands.max(axis=1))


def sgs_gmean_sequence(
    partition: GroupPartition,
    alpha: float,
    lam: float,
    q_g: float,
    v,
    quantile_denominator: int | None = None,
) -> SortedWeights:
    """Group sequence of the bi-level mean form.

    Each w_i solves
        (1/m) * sum_j F_FN((1-alpha)*lam*p_j*w_i + alpha*lam*sum(v_1..v_j))
            = 1 - q_g*i/quantile_denominator
    with the denominator defaulting to m (matching the max form; the
    number of variables is the other published variant and can be passed
    explicitly).
    """
    _check_fdr(q_g)
    _check_lambda(lam)
    if not 0.0 <= alpha < 1.0:
        raise AlphaOutOfRange("gmean needs 0 <= alpha < 1")
    v = check_weights(v, partition.n_variables)
    m = partition.n_groups
    denom = m if quantile_denominator is None else int(quantile_denominator)
    if denom < m:
        raise ValueError("quantile_denominator must be >= the group count")
    i = np.arange(1, m + 1, dtype=np.float64)
    targets = 1.0 - q_g * i / denom
    sizes, counts, _ = _size_classes(partition)
    topsum = np.concatenate(([0.0], np.cumsum(v)))
    slopes = (1.0 - alpha) * lam * sizes.astype(np.float64)
    offsets = alpha * lam * topsum[sizes]

    def averaged(x):
        acc = np.zeros_like(x)
        for d, c, s, o in zip(sizes, counts, slopes, offsets):
            acc += c * folded_sum_cdf(s * x + o, int(d))
        return acc / m

    hi = np.stack(
        [
            (folded_sum_quantile(targets, int(d)) - o) / s
            for d, s, o in zip(sizes, slopes, offsets)
        ],
        axis=1,
    ).max(axis=1) * 2.0
    return _monotone(_bisect_increasing(averaged, targets, hi))


def build_penalty_spec(
    partition: GroupPartition,
    alpha: float,
    lam: float,
    q_v: float,
    q_g: float,
    variable_kind: VariableKind | str = VariableKind.vmean,
    group_kind: GroupKind | str = GroupKind.gslope_mean,
    *,
    n_samples: int | None = None,
    quantile_denominator: int | None = None,
    fixed_point: bool = False,
) -> PenaltySpec:
    """Resolve both weight sequences and package them with the scale.

    Parameters
    ----------
    lam : float
        Fit-scale lambda (multiplies the penalty in the objective whose
        loss carries the 1/(2n) factor).
    n_samples : int, optional
        When given, the bi-level sequences are generated at the theorem
        scale n_samples * lam, so a fit at lam = 1/n uses exactly the
        unscaled sequences. When omitted the theorem scale is pinned to 1,
        which is the same thing for that canonical choice of lam.
    fixed_point : bool
        Iterate the mutually dependent vmax/gmax (or mean) pair to a
        1e-8 sup-norm fixed point instead of the default single pass
        (v0 = the BH sequence carried at fit scale, then w, then v).
        At most 20 rounds.

    The mixing endpoints degrade gracefully: at alpha=1 the group term
    vanishes from the objective, so a group kind that requires alpha < 1
    is swapped for its gslope analogue purely to carry a valid w vector;
    symmetrically at alpha=0 the variable slot falls back to the BH
    sequence.
    """
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange("alpha must lie in [0, 1]")
    _check_lambda(lam)
    _check_fdr(q_v)
    _check_fdr(q_g)
    variable_kind = VariableKind(variable_kind)
    group_kind = GroupKind(group_kind)
    scale = 1.0 if n_samples is None else float(n_samples) * lam
    p = partition.n_variables

    def make_v(kind: VariableKind, w_vec) -> SortedWeights:
        if kind is VariableKind.bh or alpha == 0.0:
            return slope_bh_sequence(p, q_v)
        if kind is VariableKind.vmax:
            return sgs_vmax_sequence(partition, alpha, scale, q_v, w_vec)
        return sgs_vmean_sequence(partition, alpha, scale, q_v, w_vec)

    def make_w(kind: GroupKind, v_vec) -> SortedWeights:
        if kind is GroupKind.gslope_max:
            return gslope_max_sequence(partition, q_g)
        if kind is GroupKind.gslope_mean:
            return gslope_mean_sequence(partition, q_g)
        if alpha == 1.0:
            fallback = (gslope_max_sequence if kind is GroupKind.gmax
                        else gslope_mean_sequence)
            return fallback(partition, q_g)
        if kind is GroupKind.gmax:
            return sgs_gmax_sequence(partition, alpha, scale, q_g, v_vec)
        return sgs_gmean_sequence(partition, alpha, scale, q_g, v_vec,
                                  quantile_denominator=quantile_denominator)

    if group_kind in (GroupKind.gslope_max, GroupKind.gslope_mean):
        w = make_w(group_kind, None)
        v = make_v(variable_kind, w.values)
    elif variable_kind is VariableKind.bh:
        v = make_v(variable_kind, None)
        w = make_w(group_kind, v.values)
    else:
        # Mutual dependence: bootstrap from the alpha=1 variable sequence.
        # The BH vector is a fit-scale quantity, so it enters the
        # generation-scale formulas multiplied by lam/scale; at the
        # canonical lam = 1/n this keeps its contribution to the group
        # shifts near zero instead of swallowing the whole folded-sum
        # budget (which would clip w to zero and lose group control).
        v0 = SortedWeights(slope_bh_sequence(p, q_v).values * (lam / scale))
        w = make_w(group_kind, v0.values)
        v = make_v(variable_kind, w.values)
        if fixed_point:
            for _ in range(20):
                w_next = make_w(group_kind, v.values)
                v_next = make_v(variable_kind, w_next.values)
                drift = max(
                    np.max(np.abs(w_next.values - w.values), initial=0.0),
                    np.max(np.abs(v_next.values - v.values), initial=0.0),
                )
                v, w = v_next, w_next
                if drift < 1e-8:
                    break
    return PenaltySpec(
        alpha=float(alpha), lam=float(lam), q_v=float(q_v), q_g=float(q_g),
        variable_kind=variable_kind, group_kind=group_kind, v=v, w=w,
    )
