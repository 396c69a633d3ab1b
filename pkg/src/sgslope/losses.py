"""Smooth loss terms: squared error and binomial deviance, both 1/n scaled."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .data import Family
from .errors import NumericalOverflow


@dataclass(frozen=True)
class LossFunction:
    """A convex smooth loss: value and gradient as functions of (beta, x, y)."""

    family: Family
    value: Callable[[np.ndarray, np.ndarray, np.ndarray], float]
    gradient: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _gaussian_value(beta, x, y) -> float:
    r = y - x @ beta
    out = 0.5 * float(r @ r) / y.size
    if not np.isfinite(out):
        raise NumericalOverflow("squared-error loss overflowed")
    return out


def _gaussian_gradient(beta, x, y) -> np.ndarray:
    return x.T @ (x @ beta - y) / y.size


def _binomial_value(beta, x, y) -> float:
    eta = x @ beta
    out = float(np.mean(np.logaddexp(0.0, eta) - y * eta))
    if not np.isfinite(out):
        raise NumericalOverflow("binomial loss overflowed")
    return out


def _binomial_gradient(beta, x, y) -> np.ndarray:
    return x.T @ (expit(x @ beta) - y) / y.size


def make_loss(family: Family) -> LossFunction:
    """Loss for the given family.

    Gaussian: ||y - X b||^2 / (2n). Binomial: the mean negative
    log-likelihood (1/n) * sum(log(1 + exp(eta_i)) - y_i * eta_i).
    """
    family = Family(family)
    if family is Family.gaussian:
        return LossFunction(family, _gaussian_value, _gaussian_gradient)
    return LossFunction(family, _binomial_value, _binomial_gradient)
