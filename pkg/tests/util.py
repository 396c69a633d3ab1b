"""Small shared generators for randomized tests."""

from __future__ import annotations

import numpy as np


def random_sorted_weights(rng, k: int, low: float = 0.0,
                          high: float = 2.0) -> np.ndarray:
    """A non-increasing, non-negative weight vector of length k."""
    return np.sort(rng.uniform(low, high, size=k))[::-1]


def random_members(rng, p: int, m: int) -> list[np.ndarray]:
    """Split 0..p-1 into m non-empty groups with random sizes and order."""
    perm = rng.permutation(p)
    cuts = np.sort(rng.choice(np.arange(1, p), size=m - 1, replace=False))
    return [np.sort(part) for part in np.split(perm, cuts)]
