"""Splitting engine: closed-form reductions, independent convex-solver
references, the recorded fixed-point identity, path behavior, and the
failure modes."""

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

import oracles
import sgslope.solver as solver_mod
from sgslope.data import Family, GroupPartition, GroupedDataset
from sgslope.errors import (
    BacktrackingFailure,
    DimensionMismatch,
    ZeroGradient,
)
from sgslope.losses import LossFunction, make_loss
from sgslope.prox import prox_slope
from sgslope.sequences import (
    GroupKind,
    PenaltySpec,
    SortedWeights,
    VariableKind,
    gslope_max_sequence,
    slope_bh_sequence,
)
from sgslope.solver import (
    SolverConfig,
    atos_fit,
    auto_initial_step,
    fit_path,
    lambda_max,
    objective_value,
    predict,
    predict_labels,
    spec_for_lambda,
)

TIGHT = SolverConfig(tolerance=1e-12, max_iterations=50000,
                     fit_intercept=False)


def manual_spec(v, w, alpha, lam):
    """PenaltySpec with explicit weight vectors; kinds are bookkeeping."""
    return PenaltySpec(alpha=alpha, lam=lam, q_v=0.1, q_g=0.1,
                       variable_kind=VariableKind.bh,
                       group_kind=GroupKind.gslope_max,
                       v=SortedWeights(np.asarray(v, dtype=float)),
                       w=SortedWeights(np.asarray(w, dtype=float)))


def gaussian_data(rng, n, p, sizes, signal=0.0):
    x = rng.normal(0, 1, (n, p))
    beta = np.zeros(p)
    if signal:
        beta[: max(1, p // 3)] = signal
    y = x @ beta + rng.normal(0, 1, n)
    return GroupedDataset(x=x, y=y, partition=GroupPartition.from_sizes(sizes),
                          family=Family.gaussian)


class TestAutoInitialStep:
    def test_quadratic_probe_hand_value(self):
        # f(b) = ||sqrt(2) b||^2 / (2*2) = ||b||^2/2, gradient b. The first
        # probe at eps=1e-3 is accepted, giving
        # 4*(0.5 - 0.5*0.999^2)/1 = 0.003998.
        x = np.sqrt(2.0) * np.eye(2)
        y = np.zeros(2)
        gamma = auto_initial_step(make_loss("gaussian"), x, y,
                                  np.array([1.0, 0.0]))
        assert gamma == pytest.approx(0.003998, rel=1e-9)

    def test_zero_gradient_at_minimizer(self):
        x = np.eye(2)
        with pytest.raises(ZeroGradient):
            auto_initial_step(make_loss("gaussian"), x, np.zeros(2),
                              np.zeros(2))

    def test_no_descent_direction_reported(self):
        # A (non-convex) value that grows along the negative gradient
        # exhausts the probe shrinks.
        center = np.array([1.0, 0.0])
        fake = LossFunction(
            family=Family.gaussian,
            value=lambda b, x, y: float(np.linalg.norm(b - center)),
            gradient=lambda b, x, y: np.ones_like(b),
        )
        with pytest.raises(ZeroGradient):
            auto_initial_step(fake, np.eye(2), np.zeros(2), center)

    def test_deterministic(self):
        x = np.sqrt(2.0) * np.eye(2)
        loss = make_loss("gaussian")
        a = auto_initial_step(loss, x, np.zeros(2), np.array([1.0, 0.0]))
        b = auto_initial_step(loss, x, np.zeros(2), np.array([1.0, 0.0]))
        assert a == b

    def test_fit_falls_back_to_unit_step(self):
        data = GroupedDataset(x=np.eye(3), y=np.zeros(3),
                              partition=GroupPartition.from_sizes([1, 1, 1]),
                              family=Family.gaussian)
        spec = manual_spec(np.zeros(3), np.zeros(3), 0.5, 1.0)
        solution = atos_fit(data, spec,
                            SolverConfig(gamma0="auto", fit_intercept=False))
        assert solution.converged
        assert solution.gamma == 1.0
        assert_allclose(solution.beta, 0.0)


class TestReductions:
    def test_zero_weights_recover_least_squares(self):
        rng = np.random.default_rng(7)
        data = gaussian_data(rng, 30, 5, [2, 3])
        spec = manual_spec(np.zeros(5), np.zeros(2), 0.5, 1.0)
        solution = atos_fit(data, spec, TIGHT)
        beta, _, _ = oracles.ols_fit(data.x, data.y)
        assert solution.converged
        assert_allclose(solution.beta, beta, atol=1e-6)

    def test_zero_weights_with_intercept(self):
        rng = np.random.default_rng(8)
        data = gaussian_data(rng, 30, 5, [2, 3])
        spec = manual_spec(np.zeros(5), np.zeros(2), 0.5, 1.0)
        config = SolverConfig(tolerance=1e-12, max_iterations=50000)
        solution = atos_fit(data, spec, config)
        beta, icpt, _ = oracles.ols_fit(data.x, data.y, intercept=True)
        assert_allclose(solution.beta, beta, atol=1e-6)
        assert solution.intercept == pytest.approx(icpt, abs=1e-6)

    def test_orthogonal_flat_weights_soft_threshold(self):
        rng = np.random.default_rng(9)
        p = 8
        y = rng.normal(0, 2, p)
        data = GroupedDataset(x=np.eye(p), y=y,
                              partition=GroupPartition.from_sizes([1] * p),
                              family=Family.gaussian)
        v0, w0, alpha, lam = 0.9, 0.4, 0.5, 0.05
        spec = manual_spec(np.full(p, v0), np.full(p, w0), alpha, lam)
        solution = atos_fit(data, spec, TIGHT)
        tau = p * lam * (alpha * v0 + (1 - alpha) * w0)
        expected = np.sign(y) * np.maximum(np.abs(y) - tau, 0.0)
        assert_allclose(solution.beta, expected, atol=1e-8)

    def test_pure_variable_penalty_orthogonal_is_direct_prox(self):
        rng = np.random.default_rng(10)
        p = 10
        y = rng.normal(0, 2, p)
        part = GroupPartition.from_sizes([3, 3, 4])
        data = GroupedDataset(x=np.eye(p), y=y, partition=part,
                              family=Family.gaussian)
        v = slope_bh_sequence(p, 0.1).values
        w = gslope_max_sequence(part, 0.1).values
        spec = manual_spec(v, w, 1.0, 0.05)
        solution = atos_fit(data, spec, TIGHT)
        assert_allclose(solution.beta, prox_slope(y, p * 0.05 * v), atol=1e-8)

    def test_alpha_endpoints_match_disabled_prox(self):
        # alpha=1 with any w behaves as the variable-only engine; alpha=0
        # as the group-only engine.
        rng = np.random.default_rng(11)
        data = gaussian_data(rng, 25, 6, [3, 3], signal=1.0)
        v = slope_bh_sequence(6, 0.1).values
        w = gslope_max_sequence(data.partition, 0.1).values
        for alpha, v_only, w_only in (
            (1.0, v, np.zeros(2)), (0.0, np.zeros(6), w)
        ):
            full = atos_fit(data, manual_spec(v, w, alpha, 0.02), TIGHT)
            bare = atos_fit(data, manual_spec(v_only, w_only, alpha, 0.02),
                            TIGHT)
            assert abs(full.objective - bare.objective) <= 1e-6
            assert_allclose(full.beta, bare.beta, atol=1e-6)


class TestAgainstConvexReferences:
    def setup_method(self):
        rng = np.random.default_rng(99)
        self.x = rng.normal(0, 1, (20, 10))
        self.y = rng.normal(0, 1, 20)
        self.yb = (rng.random(20) < 0.5).astype(float)
        self.members = [[0, 1, 2], [3, 4, 5, 6], [7, 8, 9]]
        self.part = GroupPartition.from_sizes([3, 4, 3])

    def test_gaussian_objective_matches_convex_solver(self):
        data = GroupedDataset(x=self.x, y=self.y, partition=self.part,
                              family=Family.gaussian)
        spec = manual_spec(slope_bh_sequence(10, 0.1).values,
                           gslope_max_sequence(self.part, 0.1).values,
                           0.6, 0.02)
        solution = atos_fit(data, spec, SolverConfig(
            tolerance=1e-9, max_iterations=50000, fit_intercept=False))
        pv = spec.effective_variable_weights()
        pw = spec.effective_group_weights()
        _, _, ref = oracles.cvxpy_sgs_minimize(self.x, self.y, self.members,
                                               pv, pw)
        assert solution.converged
        assert abs(solution.objective - ref) <= 1e-6 * max(1.0, abs(ref))
        # Long-run first-order reference agrees too.
        b_fs = oracles.fixed_step_splitting_reference(
            self.x, self.y, self.part, pv, pw, step=0.05, iterations=300000)
        obj_fs = oracles.sgs_objective_direct(b_fs, 0.0, self.x, self.y,
                                              self.members, pv, pw, "gaussian")
        assert abs(solution.objective - obj_fs) <= 1e-6 * max(1.0, abs(obj_fs))

    def test_binomial_intercept_objective_matches_convex_solver(self):
        data = GroupedDataset(x=self.x, y=self.yb, partition=self.part,
                              family=Family.binomial)
        spec = manual_spec(slope_bh_sequence(10, 0.1).values,
                           gslope_max_sequence(self.part, 0.1).values,
                           0.6, 0.01)
        solution = atos_fit(data, spec, SolverConfig(
            tolerance=1e-9, max_iterations=50000))
        mine = objective_value(data, spec, solution.beta, solution.intercept)
        _, _, ref = oracles.cvxpy_sgs_minimize(
            self.x, self.yb, self.members,
            spec.effective_variable_weights(),
            spec.effective_group_weights(),
            family="binomial", intercept=True)
        assert solution.converged
        assert abs(mine - ref) <= 1e-6 * max(1.0, abs(ref))

    def test_recorded_state_satisfies_prox_identity(self):
        # (z, u, gamma) stored on the solution reproduce beta through the
        # sorted-L1 prox step exactly, for both families.
        data = GroupedDataset(x=self.x, y=self.y, partition=self.part,
                              family=Family.gaussian)
        spec = manual_spec(slope_bh_sequence(10, 0.1).values,
                           gslope_max_sequence(self.part, 0.1).values,
                           0.6, 0.02)
        sol = atos_fit(data, spec, SolverConfig(
            tolerance=1e-9, max_iterations=50000, fit_intercept=False))
        grad = make_loss("gaussian").gradient(sol.z, self.x, self.y)
        rebuilt = prox_slope(sol.z - sol.gamma * sol.u - sol.gamma * grad,
                             sol.gamma * spec.effective_variable_weights())
        assert_allclose(rebuilt, sol.beta, atol=1e-12)
        assert sol.final_residual <= 1e-9

        datab = GroupedDataset(x=self.x, y=self.yb, partition=self.part,
                               family=Family.binomial)
        specb = manual_spec(slope_bh_sequence(10, 0.1).values,
                            gslope_max_sequence(self.part, 0.1).values,
                            0.6, 0.01)
        solb = atos_fit(datab, specb, SolverConfig(
            tolerance=1e-9, max_iterations=50000))
        x_aug = np.hstack([self.x, np.ones((20, 1))])
        gradb = make_loss("binomial").gradient(solb.z, x_aug, self.yb)
        step = solb.z - solb.gamma * solb.u - solb.gamma * gradb
        rebuilt_b = np.empty(11)
        rebuilt_b[:10] = prox_slope(
            step[:10], solb.gamma * specb.effective_variable_weights())
        rebuilt_b[10] = step[10]
        assert_allclose(rebuilt_b,
                        np.append(solb.beta, solb.intercept), atol=1e-12)

    def test_objective_never_exceeds_null_model(self):
        data = GroupedDataset(x=self.x, y=self.y, partition=self.part,
                              family=Family.gaussian)
        spec = manual_spec(slope_bh_sequence(10, 0.1).values,
                           gslope_max_sequence(self.part, 0.1).values,
                           0.6, 0.02)
        solution = atos_fit(data, spec, SolverConfig(fit_intercept=False))
        null = objective_value(data, spec, np.zeros(10))
        assert solution.objective <= null + 1e-12
        recomputed = objective_value(data, spec, solution.beta,
                                     solution.intercept)
        assert recomputed == pytest.approx(solution.objective, abs=1e-12)


class TestSolutionBookkeeping:
    def test_selected_groups_follow_selected_variables(self):
        rng = np.random.default_rng(21)
        data = gaussian_data(rng, 40, 9, [3, 3, 3], signal=2.0)
        spec = manual_spec(slope_bh_sequence(9, 0.1).values,
                           gslope_max_sequence(data.partition, 0.1).values,
                           0.6, 0.01)
        solution = atos_fit(data, spec, SolverConfig(fit_intercept=False))
        assert_allclose(np.flatnonzero(solution.beta != 0),
                        solution.selected_variables)
        expected_groups = np.unique(
            data.partition.group_of[solution.selected_variables])
        assert_allclose(solution.selected_groups, expected_groups)

    def test_nonconvergence_flagged_not_raised(self):
        rng = np.random.default_rng(22)
        data = gaussian_data(rng, 30, 6, [3, 3], signal=2.0)
        spec = manual_spec(slope_bh_sequence(6, 0.1).values,
                           gslope_max_sequence(data.partition, 0.1).values,
                           0.6, 0.001)
        solution = atos_fit(data, spec, SolverConfig(
            tolerance=1e-14, max_iterations=3, fit_intercept=False))
        assert not solution.converged
        assert solution.iterations == 3
        assert solution.final_residual > 1e-14

    def test_spec_dimension_mismatch(self):
        rng = np.random.default_rng(23)
        data = gaussian_data(rng, 10, 4, [2, 2])
        with pytest.raises(DimensionMismatch):
            atos_fit(data, manual_spec(np.zeros(3), np.zeros(2), 0.5, 1.0))
        with pytest.raises(DimensionMismatch):
            atos_fit(data, manual_spec(np.zeros(4), np.zeros(3), 0.5, 1.0))

    def test_warm_start_length_checked(self):
        rng = np.random.default_rng(24)
        data = gaussian_data(rng, 10, 4, [2, 2])
        spec = manual_spec(np.zeros(4), np.zeros(2), 0.5, 1.0)
        with pytest.raises(DimensionMismatch):
            atos_fit(data, spec, SolverConfig(fit_intercept=False),
                     z0=np.zeros(3))

    def test_backtracking_cap_raises(self, monkeypatch):
        # A loss that jumps up at any point other than the current iterate
        # defeats every majorization test.
        def fake_make_loss(family):
            return LossFunction(
                family=Family(family),
                value=lambda b, x, y: 0.0 if not b.any() else 1.0,
                gradient=lambda b, x, y: np.ones_like(b),
            )

        monkeypatch.setattr(solver_mod, "make_loss", fake_make_loss)
        data = GroupedDataset(x=np.eye(2), y=np.zeros(2),
                              partition=GroupPartition.from_sizes([1, 1]),
                              family=Family.gaussian)
        spec = manual_spec(np.zeros(2), np.zeros(2), 0.5, 1.0)
        with pytest.raises(BacktrackingFailure):
            atos_fit(data, spec, SolverConfig(fit_intercept=False))


class TestSolverConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(gamma0=0.0), dict(gamma0=-1.0), dict(gamma0="fast"),
        dict(eta=0.0), dict(eta=1.0), dict(tolerance=0.0),
        dict(max_iterations=0),
    ])
    def test_rejects_bad_knobs(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)


class TestSpecForLambda:
    def test_fixed_kinds_share_sequences_across_lambda(self):
        rng = np.random.default_rng(31)
        data = gaussian_data(rng, 20, 6, [3, 3])
        specs = [
            spec_for_lambda(data, 0.5, 0.1, 0.1, "bh", "gslope-max", lam=lam)
            for lam in (0.5, 0.05)
        ]
        assert_allclose(specs[0].v.values, specs[1].v.values)
        assert_allclose(specs[0].w.values, specs[1].w.values)
        assert_allclose(specs[1].effective_variable_weights() * 10.0,
                        specs[0].effective_variable_weights())

    def test_bilevel_side_regenerates_per_lambda(self):
        # Default pairing: group side fixed, variable side rebuilt at the
        # theorem scale n*lam, so v changes nonlinearly with lambda.
        rng = np.random.default_rng(32)
        data = gaussian_data(rng, 20, 6, [3, 3])
        a = spec_for_lambda(data, 0.5, 0.1, 0.1, lam=0.02)
        b = spec_for_lambda(data, 0.5, 0.1, 0.1, lam=0.002)
        assert_allclose(a.w.values, b.w.values)
        ratio = b.v.values / a.v.values
        assert np.ptp(ratio) > 1e-3


class TestLambdaMaxAndPath:
    def test_lambda_max_certifies_null_fit(self):
        rng = np.random.default_rng(41)
        data = gaussian_data(rng, 30, 9, [3, 3, 3], signal=3.0)
        config = SolverConfig(fit_intercept=False)
        top = lambda_max(data, 0.6, 0.1, 0.1, "bh", "gslope-max", config)
        spec = spec_for_lambda(data, 0.6, 0.1, 0.1, "bh", "gslope-max",
                               lam=top)
        assert atos_fit(data, spec, config).selected_variables.size == 0

    def test_path_shape_and_endpoints(self):
        rng = np.random.default_rng(42)
        data = gaussian_data(rng, 40, 9, [3, 3, 3], signal=3.0)
        config = SolverConfig(fit_intercept=False)
        path = fit_path(data, 0.6, 0.1, 0.1, "bh", "gslope-max",
                        path_length=12, min_ratio=0.1, config=config)
        lams = np.array([lam for lam, _ in path])
        assert lams.size == 12
        steps = np.diff(np.log(lams))
        assert_allclose(steps, steps[0], atol=1e-12)
        assert lams[-1] == pytest.approx(0.1 * lams[0], rel=1e-12)
        assert path[0][1].selected_variables.size == 0
        assert path[-1][1].selected_variables.size > 0

    def test_path_is_deterministic(self):
        rng = np.random.default_rng(43)
        data = gaussian_data(rng, 30, 6, [3, 3], signal=2.0)
        config = SolverConfig(fit_intercept=False)
        first = fit_path(data, 0.5, 0.1, 0.1, path_length=8, config=config)
        second = fit_path(data, 0.5, 0.1, 0.1, path_length=8, config=config)
        for (lam_a, sol_a), (lam_b, sol_b) in zip(first, second):
            assert lam_a == lam_b
            assert np.array_equal(sol_a.beta, sol_b.beta)

    def test_support_shrink_logged_not_fatal(self, caplog):
        rng = np.random.default_rng(44)
        data = gaussian_data(rng, 30, 6, [3, 3], signal=3.0)
        config = SolverConfig(fit_intercept=False)
        top = lambda_max(data, 0.5, 0.1, 0.1, "bh", "gslope-max", config)
        # Walking the path upward forces the support to shrink to null.
        with caplog.at_level(logging.WARNING, logger="sgslope.solver"):
            path = fit_path(data, 0.5, 0.1, 0.1, "bh", "gslope-max",
                            config=config,
                            lambdas=np.array([0.05 * top, top]))
        assert path[0][1].selected_variables.size > 0
        assert path[1][1].selected_variables.size == 0
        assert any("support shrank" in rec.message for rec in caplog.records)

    def test_explicit_spec_alignment_checked(self):
        rng = np.random.default_rng(45)
        data = gaussian_data(rng, 20, 4, [2, 2])
        spec = manual_spec(np.zeros(4), np.zeros(2), 0.5, 1.0)
        with pytest.raises(DimensionMismatch):
            fit_path(data, 0.5, 0.1, 0.1, lambdas=np.array([1.0, 0.5]),
                     specs=[spec])

    @pytest.mark.parametrize("kwargs", [
        dict(path_length=1), dict(min_ratio=0.0), dict(min_ratio=1.0),
    ])
    def test_path_parameter_domain(self, kwargs):
        rng = np.random.default_rng(46)
        data = gaussian_data(rng, 20, 4, [2, 2])
        with pytest.raises(ValueError):
            fit_path(data, 0.5, 0.1, 0.1, **kwargs)


class TestPredict:
    def make_solution(self, beta, intercept):
        beta = np.asarray(beta, dtype=float)
        return solver_mod.SgsSolution(
            beta=beta, intercept=intercept,
            selected_variables=np.flatnonzero(beta),
            selected_groups=np.array([]), iterations=1, converged=True,
            final_residual=0.0, objective=0.0)

    def test_null_model_predicts_constants(self):
        sol = self.make_solution(np.zeros(3), 0.7)
        x = np.random.default_rng(0).normal(size=(5, 3))
        assert_allclose(predict(sol, x), 0.7)
        probs = predict(sol, x, Family.binomial)
        assert_allclose(probs, 1.0 / (1.0 + np.exp(-0.7)))

    def test_binomial_probabilities_in_unit_interval(self):
        sol = self.make_solution([3.0, -2.0], -1.0)
        x = np.random.default_rng(1).normal(0, 1, (50, 2))
        probs = predict(sol, x, "binomial")
        assert np.all((probs > 0) & (probs < 1))
        # Extreme linear predictors may saturate in floats but never
        # escape [0, 1].
        extreme = predict(sol, np.array([[1e3, 0.0], [-1e3, 0.0]]),
                          "binomial")
        assert np.all((extreme >= 0) & (extreme <= 1))

    def test_labels_threshold_and_held_out_rate(self):
        rng = np.random.default_rng(2)
        beta = np.array([2.0, -1.5, 0.0])
        x_new = rng.normal(0, 1, (200, 3))
        truth = (x_new @ beta > 0).astype(np.int64)
        sol = self.make_solution(beta, 0.0)
        labels = predict_labels(sol, x_new)
        assert set(np.unique(labels)) <= {0, 1}
        assert_allclose(labels,
                        (predict(sol, x_new, "binomial") >= 0.5).astype(int))
        rate = float(np.mean(labels == truth))
        assert rate == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        sol = self.make_solution([1.0, 2.0], 0.0)
        with pytest.raises(DimensionMismatch):
            predict(sol, np.ones((4, 3)))
        with pytest.raises(DimensionMismatch):
            predict(sol, np.ones(2))
