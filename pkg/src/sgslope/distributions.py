"""Distribution oracles used by the penalty sequences.

The folded-normal sum (the distribution of sum_{i=1..k} |Z_i| for i.i.d.
standard normal Z) has no closed form for k >= 2. Its density is computed
once per k by FFT self-convolution of the half-normal density on a fine
grid; the CDF and quantile functions interpolate that table. For k = 1 the
half-normal closed form is used, so the identity
folded_sum_quantile(p, 1) == normal_quantile((1+p)/2) is exact.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve
from scipy.stats import chi, norm

_GRID_POINTS = 1 << 16


def _check_prob(prob) -> None:
    arr = np.asarray(prob, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValueError("probability must lie strictly inside (0, 1)")


def normal_quantile(prob):
    """Standard normal quantile function."""
    _check_prob(prob)
    return norm.ppf(prob)


def chi_quantile(prob, dof: int):
    """Quantile of the chi distribution with `dof` degrees of freedom."""
    _check_prob(prob)
    if dof < 1:
        raise ValueError("dof must be >= 1")
    return chi.ppf(prob, dof)


def _convolve(a: np.ndarray, b: np.ndarray, dx: float) -> np.ndarray:
    return fftconvolve(a, b)[: a.size] * dx


@lru_cache(maxsize=None)
def _folded_sum_table(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Grid and CDF of the sum of k folded standard normals."""
    mean = k * np.sqrt(2.0 / np.pi)
    sd = np.sqrt(k * (1.0 - 2.0 / np.pi))
    upper = mean + 14.0 * sd + 4.0
    t = np.linspace(0.0, upper, _GRID_POINTS)
    dx = t[1] - t[0]
    half_normal = np.sqrt(2.0 / np.pi) * np.exp(-0.5 * t * t)
    # k-fold convolution by binary exponentiation; truncation beyond the
    # grid loses only mass past `upper`, which is negligible by design.
    density = None
    power = half_normal
    bits = k
    while bits:
        if bits & 1:
            density = power if density is None else _convolve(density, power, dx)
        bits >>= 1
        if bits:
            power = _convolve(power, power, dx)
    steps = 0.5 * (density[1:] + density[:-1]) * dx
    cdf = np.concatenate(([0.0], np.cumsum(steps)))
    cdf /= cdf[-1]
    return t, cdf


def folded_sum_cdf(x, group_size: int):
    """CDF of the sum of `group_size` absolute standard normals."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    if group_size == 1:
        return np.where(x <= 0.0, 0.0, 2.0 * norm.cdf(x) - 1.0)[()]
    t, cdf = _folded_sum_table(group_size)
    return np.interp(x, t, cdf, left=0.0, right=1.0)[()]


def folded_sum_quantile(prob, group_size: int):
    """Quantile of the sum of `group_size` absolute standard normals."""
    _check_prob(prob)
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    prob = np.asarray(prob, dtype=np.float64)
    if group_size == 1:
        return norm.ppf(0.5 * (1.0 + prob))[()]
    t, cdf = _folded_sum_table(group_size)
    return np.interp(prob, cdf, t)[()]
