"""Proximal operators: frozen oracle values, closed-form reductions,
brute-force agreement, and the optimality/equivariance properties."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

import oracles
import util
from sgslope.data import GroupPartition
from sgslope.errors import LengthMismatch, WeightOrderViolation
from sgslope.prox import (
    check_weights,
    group_scaling,
    group_sorted_l1_penalty,
    prox_gslope,
    prox_gslope_transformed,
    prox_slope,
    sorted_l1_penalty,
)


@st.composite
def slope_instance(draw):
    k = draw(st.integers(1, 6))
    coords = st.floats(-50.0, 50.0, allow_nan=False)
    x = np.array(draw(st.lists(coords, min_size=k, max_size=k)))
    raw = draw(st.lists(st.floats(0.0, 10.0, allow_nan=False),
                        min_size=k, max_size=k))
    return x, np.sort(np.array(raw))[::-1]


@st.composite
def gslope_instance(draw):
    p = draw(st.integers(1, 6))
    coords = st.floats(-50.0, 50.0, allow_nan=False)
    x = np.array(draw(st.lists(coords, min_size=p, max_size=p)))
    labels = draw(st.lists(st.integers(0, 2), min_size=p, max_size=p))
    _, inverse = np.unique(labels, return_inverse=True)
    members = [np.flatnonzero(inverse == g) for g in range(inverse.max() + 1)]
    raw = draw(st.lists(st.floats(0.0, 10.0, allow_nan=False),
                        min_size=len(members), max_size=len(members)))
    return x, np.sort(np.array(raw))[::-1], members


class TestProxSlope:
    def test_zero_input_stays_zero(self):
        assert_allclose(prox_slope(np.zeros(4), [3.0, 2.0, 1.0, 0.0]),
                        np.zeros(4))

    def test_zero_weights_identity(self):
        x = np.array([2.0, -1.5, 0.25])
        assert_allclose(prox_slope(x, np.zeros(3)), x)

    def test_two_point_instance_matches_frozen_oracle_value(self):
        # Brute-force minimizer of the 2-D objective; the exact solution
        # separates into per-coordinate soft thresholds here.
        out = prox_slope([3.0, 1.0], [1.0, 0.5])
        assert_allclose(out, [2.0, 0.5], atol=1e-5)
        assert_allclose(out, [2.0, 0.5], atol=1e-12)

    def test_equal_weights_soft_threshold(self):
        rng = np.random.default_rng(11)
        x = rng.normal(0, 2, 8)
        lam = 0.7
        expected = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
        assert_allclose(prox_slope(x, np.full(8, lam)), expected, atol=1e-12)

    def test_empty_input(self):
        assert prox_slope(np.array([]), np.array([])).size == 0

    def test_unsorted_weights_rejected(self):
        with pytest.raises(WeightOrderViolation):
            prox_slope([1.0, 2.0], [0.5, 1.0])

    def test_negative_weights_rejected(self):
        with pytest.raises(WeightOrderViolation):
            prox_slope([1.0, 2.0], [1.0, -0.1])

    def test_length_mismatch_rejected(self):
        with pytest.raises(LengthMismatch):
            prox_slope([1.0, 2.0, 3.0], [1.0, 0.5])


class TestProxGslope:
    def test_zero_weights_identity(self):
        part = GroupPartition.from_sizes([2, 3])
        x = np.arange(5, dtype=float) - 2.0
        assert_allclose(prox_gslope(x, np.zeros(2), part), x)

    def test_single_group_block_soft_threshold(self):
        part = GroupPartition.from_sizes([4])
        x = np.array([3.0, 0.0, -4.0, 1.0])
        lam = 2.0
        norm = np.linalg.norm(x)
        expected = x * max(1.0 - lam / norm, 0.0)
        assert_allclose(prox_gslope(x, [lam], part), expected, atol=1e-12)
        # Weight at or above the norm kills the whole group.
        assert_allclose(prox_gslope(x, [norm + 1.0], part), np.zeros(4))

    def test_two_group_instance_matches_frozen_oracle_value(self):
        # Brute-force minimizer of the 4-D objective; exact value is
        # 1 - 1/sqrt(2) on the first group, zero on the second.
        part = GroupPartition.from_sizes([2, 2])
        out = prox_gslope([1.0, 1.0, 0.1, 0.1], [1.0, 0.5], part)
        expected = [1 - 1 / np.sqrt(2), 1 - 1 / np.sqrt(2), 0.0, 0.0]
        assert_allclose(out, expected, atol=1e-5)
        assert_allclose(out, expected, atol=1e-12)

    def test_zero_norm_group_stays_zero(self):
        part = GroupPartition.from_sizes([2, 2])
        out = prox_gslope([0.0, 0.0, 3.0, 4.0], [1.0, 0.5], part)
        assert_allclose(out[:2], 0.0)
        assert np.linalg.norm(out[2:]) > 0

    def test_x_length_mismatch_rejected(self):
        part = GroupPartition.from_sizes([2, 2])
        with pytest.raises(LengthMismatch):
            prox_gslope([1.0, 2.0, 3.0], [1.0, 0.5], part)

    def test_weights_length_mismatch_rejected(self):
        part = GroupPartition.from_sizes([2, 2])
        with pytest.raises(LengthMismatch):
            prox_gslope([1.0, 2.0, 3.0, 4.0], [1.0, 0.5, 0.2], part)


class TestProxGslopeTransformed:
    def test_singleton_groups_zero_dual_reduces_to_plain_prox(self):
        part = GroupPartition.from_sizes([1, 1, 1])
        b = np.array([1.5, -0.4, 0.9])
        w = np.array([1.0, 0.6, 0.1])
        gamma = 0.8
        out = prox_gslope_transformed(b, np.zeros(3), gamma, w,
                                      group_scaling(part), part)
        assert_allclose(out, prox_gslope(b, gamma * w, part), atol=1e-14)

    def test_zero_weights_is_translation(self):
        part = GroupPartition.from_sizes([2, 3])
        diag = group_scaling(part)
        rng = np.random.default_rng(5)
        b, u = rng.normal(size=5), rng.normal(size=5)
        gamma = 0.5
        out = prox_gslope_transformed(b, u, gamma, np.zeros(2), diag, part)
        assert_allclose(out, b + gamma * u / diag**2, atol=1e-14)

    def test_matches_dense_composed_formula(self):
        # Direct dense evaluation: D^-1 prox(D b + D^-1 gamma u; gamma w),
        # with the inner prox supplied by the brute-force oracle.
        part = GroupPartition.from_sizes([2, 3])
        rng = np.random.default_rng(17)
        b, u = rng.normal(size=5), rng.normal(size=5)
        gamma, w = 0.5, np.array([1.2, 0.4])
        d = np.diag(np.sqrt([2.0, 2.0, 3.0, 3.0, 3.0]))
        inner = d @ b + np.linalg.inv(d) @ (gamma * u)
        members = [[0, 1], [2, 3, 4]]
        expected = np.linalg.inv(d) @ oracles.brute_force_prox_gslope(
            inner, gamma * w, members)
        out = prox_gslope_transformed(b, u, gamma, w, group_scaling(part),
                                      part)
        assert_allclose(out, expected, atol=1e-5)

    @pytest.mark.parametrize("gamma", [0.0, -1.0])
    def test_nonpositive_step_rejected(self, gamma):
        part = GroupPartition.from_sizes([1, 1])
        with pytest.raises(ValueError):
            prox_gslope_transformed([1.0, 2.0], [0.0, 0.0], gamma,
                                    [1.0, 0.5], group_scaling(part), part)


class TestBruteForceAgreement:
    def test_slope_matches_oracle(self):
        rng = np.random.default_rng(101)
        for _ in range(20):
            k = int(rng.integers(1, 7))
            x = rng.normal(0, 3, k)
            w = util.random_sorted_weights(rng, k)
            expected = oracles.brute_force_prox_slope(x, w)
            assert_allclose(prox_slope(x, w), expected, atol=1e-5)

    def test_gslope_matches_oracle(self):
        rng = np.random.default_rng(202)
        for _ in range(20):
            p = int(rng.integers(2, 7))
            m = int(rng.integers(1, min(p, 3) + 1))
            members = util.random_members(rng, p, m)
            x = rng.normal(0, 3, p)
            w = util.random_sorted_weights(rng, m)
            part = GroupPartition.from_members(members)
            expected = oracles.brute_force_prox_gslope(x, w, members)
            assert_allclose(prox_gslope(x, w, part), expected, atol=1e-5)


class TestProperties:
    @settings(deadline=None)
    @given(slope_instance())
    def test_signs_and_magnitude_order_preserved(self, instance):
        x, w = instance
        z = prox_slope(x, w)
        assert np.all((z == 0) | (np.sign(z) == np.sign(x)))
        order = np.argsort(-np.abs(x), kind="stable")
        assert np.all(np.diff(np.abs(z)[order]) <= 1e-12)

    @settings(deadline=None)
    @given(slope_instance(), slope_instance())
    def test_slope_non_expansive(self, a, b):
        x, w = a
        y, _ = b
        k = min(x.size, y.size)
        x, y, w = x[:k], y[:k], w[:k]
        lhs = np.linalg.norm(prox_slope(x, w) - prox_slope(y, w))
        assert lhs <= np.linalg.norm(x - y) + 1e-9

    @settings(deadline=None)
    @given(gslope_instance(), st.integers(0, 2**31 - 1))
    def test_gslope_non_expansive(self, instance, seed):
        x, w, members = instance
        part = GroupPartition.from_members(members)
        y = np.random.default_rng(seed).normal(0, 10, x.size)
        lhs = np.linalg.norm(prox_gslope(x, w, part)
                             - prox_gslope(y, w, part))
        assert lhs <= np.linalg.norm(x - y) + 1e-9

    @settings(deadline=None)
    @given(slope_instance(), st.integers(0, 2**31 - 1))
    def test_slope_permutation_equivariance(self, instance, seed):
        x, w = instance
        perm = np.random.default_rng(seed).permutation(x.size)
        assert_allclose(prox_slope(x[perm], w), prox_slope(x, w)[perm],
                        atol=1e-12)

    @settings(deadline=None)
    @given(gslope_instance(), st.integers(0, 2**31 - 1))
    def test_gslope_permutation_equivariance(self, instance, seed):
        x, w, members = instance
        perm = np.random.default_rng(seed).permutation(x.size)
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        moved = [inverse[np.asarray(g)] for g in members]
        out = prox_gslope(x, w, GroupPartition.from_members(members))
        out_moved = prox_gslope(x[perm], w,
                                GroupPartition.from_members(moved))
        assert_allclose(out_moved, out[perm], atol=1e-12)

    @settings(deadline=None)
    @given(slope_instance())
    def test_subdifferential_partial_sum_certificate(self, instance):
        # Optimality of the output: cumulative shrinkage never exceeds the
        # cumulative weights, and matches exactly at the end of every
        # constant block of the nonzero (support) magnitudes.
        x, w = instance
        z = prox_slope(x, w)
        order = np.argsort(-np.abs(x), kind="stable")
        mags_in, mags_out = np.abs(x)[order], np.abs(z)[order]
        slack = np.cumsum(mags_in - mags_out) - np.cumsum(w)
        scale = max(mags_in[0] if mags_in.size else 1.0, 1.0)
        assert np.all(slack <= 1e-9 * scale)
        for i in range(x.size):
            end_of_block = (i == x.size - 1
                            or mags_out[i + 1] < mags_out[i] - 1e-9 * scale)
            if mags_out[i] > 1e-12 * scale and end_of_block:
                assert abs(slack[i]) <= 1e-9 * scale

    @settings(deadline=None)
    @given(gslope_instance(), st.integers(0, 2**31 - 1),
           st.floats(0.0, 1.0, allow_nan=False))
    def test_combined_penalty_midpoint_convexity(self, instance, seed, alpha):
        x, w, members = instance
        rng = np.random.default_rng(seed)
        a, b = rng.normal(0, 5, x.size), rng.normal(0, 5, x.size)
        v = util.random_sorted_weights(rng, x.size)

        def pen(beta):
            return oracles.sgs_penalty_direct(beta, members, alpha * v,
                                              (1 - alpha) * w)

        lhs = pen((a + b) / 2)
        assert lhs <= (pen(a) + pen(b)) / 2 + 1e-9


class TestPenaltyValues:
    def test_sorted_l1_matches_direct(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 2, 7)
        w = util.random_sorted_weights(rng, 7)
        assert sorted_l1_penalty(x, w) == pytest.approx(
            oracles.sorted_l1_direct(x, w), abs=1e-12)

    def test_group_sorted_l1_includes_size_scaling(self):
        part = GroupPartition.from_sizes([2, 3, 1])
        rng = np.random.default_rng(4)
        x = rng.normal(0, 2, 6)
        w = util.random_sorted_weights(rng, 3)
        scaled = np.sqrt([2.0, 3.0, 1.0]) * part.group_norms(x)
        expected = float(np.sort(scaled)[::-1] @ w)
        assert group_sorted_l1_penalty(x, w, part) == pytest.approx(
            expected, abs=1e-12)

    def test_check_weights_returns_float_array(self):
        out = check_weights([2, 1, 0], 3)
        assert out.dtype == np.float64
        assert_allclose(out, [2.0, 1.0, 0.0])
