"""Exact proximal operators for the sorted-L1 and group sorted-L1 penalties."""

from __future__ import annotations

import numpy as np
from scipy.optimize import isotonic_regression

from .data import GroupPartition
from .errors import LengthMismatch, WeightOrderViolation


def check_weights(weights, length: int) -> np.ndarray:
    """Validate a penalty weight vector: right length, non-increasing,
    non-negative. Returns it as a float array."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size != length:
        raise LengthMismatch(f"expected {length} weights, got shape {w.shape}")
    if w.size and w[-1] < 0:
        raise WeightOrderViolation("weights must be non-negative")
    if np.any(np.diff(w) > 0):
        raise WeightOrderViolation("weights must be sorted non-increasing")
    return w


def group_scaling(partition: GroupPartition) -> np.ndarray:
    """Diagonal of the group scaling matrix: sqrt(group size) per variable."""
    return np.sqrt(partition.sizes.astype(np.float64))[partition.group_of]


def prox_slope(x, weights) -> np.ndarray:
    """Proximal operator of the sorted-L1 penalty.

    Returns the unique minimizer of

        0.5 * ||z - x||_2^2  +  sum_i weights_i * |z|_(i)

    where |z|_(1) >= ... >= |z|_(k) are the magnitudes of z in decreasing
    order. Signs of x are preserved and the output magnitudes are ordered
    consistently with the input magnitudes.

    Parameters
    ----------
    x : array, shape (k,)
    weights : array, shape (k,)
        Non-negative, sorted non-increasing.
    """
    x = np.asarray(x, dtype=np.float64)
    w = check_weights(weights, x.size)
    if x.size == 0:
        return x.copy()
    mags = np.abs(x)
    # Stable sort so ties in |x| keep original index order.
    order = np.argsort(-mags, kind="stable")
    diffs = mags[order] - w
    # Pool-adjacent-violators gives the best non-increasing fit to diffs;
    # clipping at zero then solves the sign-constrained problem.
    shrunk = np.maximum(isotonic_regression(diffs, increasing=False).x, 0.0)
    out = np.empty_like(mags)
    out[order] = shrunk
    return np.sign(x) * out


def prox_gslope(x, weights, partition: GroupPartition) -> np.ndarray:
    """Proximal operator of the group sorted-L1 penalty.

    Minimizes 0.5*||z - x||^2 + sum_g weights_g * ||z^(g)||_2 with weights
    matched to groups in decreasing order of ||x^(g)||_2: the group norms
    are shrunk by the sorted-L1 prox and each group is rescaled by
    (shrunk norm / original norm), zero groups staying exactly zero.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size != partition.n_variables:
        raise LengthMismatch(
            f"x has length {x.size}, partition covers {partition.n_variables}"
        )
    norms = partition.group_norms(x)
    shrunk = prox_slope(norms, weights)
    factors = np.divide(shrunk, norms, out=np.zeros_like(norms),
                        where=norms > 0)
    return x * factors[partition.group_of]


def prox_gslope_transformed(
    b, u, gamma: float, weights, scaling, partition: GroupPartition
) -> np.ndarray:
    """Group sorted-L1 prox conjugated by the diagonal group scaling D.

    Returns D^-1 * prox_gslope(D*b + D^-1*gamma*u ; gamma*weights).
    With all groups of size 1 (D = I) this is prox_gslope(b + gamma*u;
    gamma*weights).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    b = np.asarray(b, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    diag = np.asarray(scaling, dtype=np.float64)
    transformed = diag * b + (gamma / diag) * u
    w = np.asarray(weights, dtype=np.float64) * gamma
    return prox_gslope(transformed, w, partition) / diag


def sorted_l1_penalty(x, weights) -> float:
    """sum_i weights_i * |x|_(i) with magnitudes sorted decreasing."""
    x = np.asarray(x, dtype=np.float64)
    w = check_weights(weights, x.size)
    return float(np.sort(np.abs(x))[::-1] @ w)


def group_sorted_l1_penalty(x, weights, partition: GroupPartition) -> float:
    """sum_i weights_i * t_(i) where t_g = sqrt(p_g)*||x^(g)||_2, sorted."""
    w = check_weights(weights, partition.n_groups)
    scaled = np.sqrt(partition.sizes.astype(np.float64)) * partition.group_norms(x)
    return float(np.sort(scaled)[::-1] @ w)
