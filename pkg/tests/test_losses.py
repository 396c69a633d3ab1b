"""Loss values and gradients, checked against central finite differences."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sgslope.data import Family
from sgslope.errors import NumericalOverflow
from sgslope.losses import make_loss


def central_difference(value, beta, x, y, h=1e-6):
    grad = np.empty_like(beta)
    for j in range(beta.size):
        step = np.zeros_like(beta)
        step[j] = h
        grad[j] = (value(beta + step, x, y) - value(beta - step, x, y)) / (2 * h)
    return grad


@pytest.mark.parametrize("family", [Family.gaussian, Family.binomial])
def test_gradient_matches_central_differences(family):
    # 100 random evaluation points per family, 1e-5 relative agreement.
    loss = make_loss(family)
    rng = np.random.default_rng(42)
    for _ in range(100):
        n, p = int(rng.integers(5, 30)), int(rng.integers(1, 8))
        x = rng.normal(0, 1, (n, p))
        if family is Family.binomial:
            y = rng.integers(0, 2, n).astype(float)
        else:
            y = rng.normal(0, 1, n)
        beta = rng.normal(0, 1, p)
        analytic = loss.gradient(beta, x, y)
        numeric = central_difference(loss.value, beta, x, y)
        assert_allclose(analytic, numeric,
                        rtol=1e-5, atol=1e-7 * max(1.0, np.abs(analytic).max()))


def test_gaussian_value_is_half_mean_square():
    loss = make_loss("gaussian")
    x = np.eye(3)
    y = np.array([1.0, -2.0, 0.5])
    assert loss.value(np.zeros(3), x, y) == pytest.approx(
        0.5 * np.sum(y**2) / 3)
    assert loss.value(y, x, y) == 0.0


def test_binomial_value_at_zero_is_log_two():
    loss = make_loss("binomial")
    x = np.ones((4, 1))
    y = np.array([0.0, 1.0, 1.0, 0.0])
    assert loss.value(np.zeros(1), x, y) == pytest.approx(np.log(2.0))


def test_binomial_handles_extreme_linear_predictors():
    # logaddexp/expit keep the loss finite for eta far outside float exp range.
    loss = make_loss("binomial")
    x = np.array([[1.0], [-1.0]])
    y = np.array([1.0, 0.0])
    value = loss.value(np.array([800.0]), x, y)
    assert np.isfinite(value)
    assert np.all(np.isfinite(loss.gradient(np.array([800.0]), x, y)))


def test_gaussian_overflow_reported():
    loss = make_loss("gaussian")
    x = np.array([[1e200], [1e200]])
    y = np.zeros(2)
    with np.errstate(over="ignore"), pytest.raises(NumericalOverflow):
        loss.value(np.array([1e200]), x, y)


def test_family_coercion():
    assert make_loss("gaussian").family is Family.gaussian
    assert make_loss(Family.binomial).family is Family.binomial
    with pytest.raises(ValueError):
        make_loss("poisson")
