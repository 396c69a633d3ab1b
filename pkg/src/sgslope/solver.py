"""Adaptive three-operator splitting for the sparse-group SLOPE objective.

The objective fitted here is

    loss(b) + lam*alpha * sum_i v_i |b|_(i)
            + lam*(1-alpha) * sum_g w_g sqrt(p_g) ||b^(g)||_2

with the loss carrying its own 1/(2n) (Gaussian) or 1/n (binomial) factor.
Each iteration takes a gradient step from z, applies the sorted-L1 prox
under a backtracked step size, then applies the group sorted-L1 prox in
the sqrt(p_g)-rescaled coordinates, and finally updates the running dual
vector u. The fixed point of the three maps satisfies the optimality
condition of the full objective, which is what the acceptance tests verify
against an independent convex solver.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit

from .data import Family, GroupedDataset, GroupPartition
from .errors import (
    BacktrackingFailure,
    DimensionMismatch,
    SgsError,
    ZeroGradient,
)
from .losses import LossFunction, make_loss
from .prox import (
    group_scaling,
    group_sorted_l1_penalty,
    prox_gslope_transformed,
    prox_slope,
    sorted_l1_penalty,
)
from .sequences import (
    GroupKind,
    PenaltySpec,
    VariableKind,
    build_penalty_spec,
)

log = logging.getLogger(__name__)

_BACKTRACK_LIMIT = 200


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the splitting iteration.

    gamma0 is the initial step size: a positive number, "auto" for the
    probe in auto_initial_step, or None for 1.0. Backtracking only ever
    shrinks the step, so starting at 1.0 costs a few one-time shrinks and
    then runs near the curvature limit, whereas the probe's estimate is
    proportional to its own epsilon (about 4e-3) whenever the probe step
    is well inside the curvature scale, which stalls the iteration.
    """

    gamma0: float | str | None = None
    eta: float = 0.7
    tolerance: float = 1e-4
    max_iterations: int = 1000
    fit_intercept: bool = True

    def __post_init__(self):
        if isinstance(self.gamma0, str):
            if self.gamma0 != "auto":
                raise ValueError("gamma0 must be positive, 'auto', or None")
        elif self.gamma0 is not None and self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must be in (0, 1)")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class SgsSolution:
    """Fit result plus internal state: (z, u, gamma) are the iterates that
    produced beta (they satisfy the sorted-L1 prox identity exactly), and
    (warm_z, warm_u) are the post-update iterates to continue from."""

    beta: np.ndarray
    intercept: float
    selected_variables: np.ndarray
    selected_groups: np.ndarray
    iterations: int
    converged: bool
    final_residual: float
    objective: float
    z: np.ndarray = field(repr=False, default=None)
    u: np.ndarray = field(repr=False, default=None)
    gamma: float = field(repr=False, default=1.0)
    warm_z: np.ndarray = field(repr=False, default=None)
    warm_u: np.ndarray = field(repr=False, default=None)


def auto_initial_step(loss: LossFunction, x, y, z0) -> float:
    """Initial step size from a single backtracked gradient probe.

    Probes z = z0 - eps*grad with eps shrinking tenfold until the loss
    decreases, then returns 4*(f(z0) - f(z)) / ||grad||^2.

    Raises
    ------
    ZeroGradient
        If the gradient vanishes at z0 or the probe cannot make progress;
        callers fall back to a step size of 1.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    grad = loss.gradient(z0, x, y)
    grad_sq = float(grad @ grad)
    if grad_sq == 0.0:
        raise ZeroGradient("gradient vanishes at the probe point")
    f0 = loss.value(z0, x, y)
    eps = 1e-3
    for _ in range(100):
        f_probe = loss.value(z0 - eps * grad, x, y)
        if f_probe <= f0:
            break
        eps *= 0.1
    else:
        raise ZeroGradient("no descent found along the negative gradient")
    gamma = 4.0 * (f0 - f_probe) / grad_sq
    if not np.isfinite(gamma) or gamma <= 0.0:
        raise ZeroGradient("degenerate step-size probe")
    return gamma


def _working_problem(data: GroupedDataset, fit_intercept: bool):
    """Rewrites the fit so the engine never sees an intercept explicitly.

    Gaussian: center y and the columns (exactly equivalent to an
    unpenalized intercept). Binomial: append an all-ones column that is
    excluded from both penalties and all group norms.
    """
    p = data.n_variables
    loss = make_loss(data.family)
    if data.family is Family.gaussian and fit_intercept:
        col_means = data.x.mean(axis=0)
        y_mean = float(data.y.mean())
        x = data.x - col_means
        y = data.y - y_mean

        def recover(b):
            beta = b[:p]
            return beta, y_mean - float(col_means @ beta)

        return x, y, loss, False, recover
    if data.family is Family.binomial and fit_intercept:
        x = np.hstack([data.x, np.ones((data.n_samples, 1))])

        def recover(b):
            return b[:p], float(b[p])

        return x, data.y, loss, True, recover

    def recover(b):
        return b[:p], 0.0

    return data.x, data.y, loss, False, recover


def _validate_spec(spec: PenaltySpec, partition: GroupPartition) -> None:
    if len(spec.v) != partition.n_variables:
        raise DimensionMismatch(
            f"variable weights cover {len(spec.v)} variables, "
            f"data has {partition.n_variables}"
        )
    if len(spec.w) != partition.n_groups:
        raise DimensionMismatch(
            f"group weights cover {len(spec.w)} groups, "
            f"data has {partition.n_groups}"
        )


def atos_fit(
    data: GroupedDataset,
    spec: PenaltySpec,
    config: SolverConfig | None = None,
    *,
    z0: np.ndarray | None = None,
    u0: np.ndarray | None = None,
) -> SgsSolution:
    """Fit the penalized objective by adaptive three-operator splitting.

    Parameters
    ----------
    data : GroupedDataset
    spec : PenaltySpec
        Resolved penalty (mixing weight, scale, both sequences).
    config : SolverConfig, optional
    z0, u0 : arrays, optional
        Warm-start iterates over the penalized coordinates (plus the
        intercept coordinate for binomial fits). Default zero.

    Returns
    -------
    SgsSolution
        Non-convergence is flagged via converged=False, never raised.
    """
    config = config or SolverConfig()
    partition = data.partition
    _validate_spec(spec, partition)
    x, y, loss, has_intercept_coord, recover = _working_problem(
        data, config.fit_intercept
    )
    p = partition.n_variables
    width = x.shape[1]
    pen_v = spec.effective_variable_weights()
    pen_w = spec.effective_group_weights()
    scaling = group_scaling(partition)

    z = np.zeros(width) if z0 is None else np.asarray(z0, dtype=np.float64).copy()
    u = np.zeros(width) if u0 is None else np.asarray(u0, dtype=np.float64).copy()
    if z.size != width or u.size != width:
        raise DimensionMismatch("warm start has the wrong length")

    if config.gamma0 == "auto":
        try:
            gamma = auto_initial_step(loss, x, y, z)
        except ZeroGradient:
            gamma = 1.0
    else:
        gamma = 1.0 if config.gamma0 is None else config.gamma0

    b = z.copy()
    z_used, u_used = z.copy(), u.copy()
    residual = np.inf
    converged = False
    iterations = 0
    norms = None
    for t in range(1, config.max_iterations + 1):
        iterations = t
        fz = loss.value(z, x, y)
        grad = loss.gradient(z, x, y)
        # Backtracked sorted-L1 step: accept b once the quadratic model at
        # z majorizes the loss at b, shrinking gamma otherwise.
        for _ in range(_BACKTRACK_LIMIT):
            step = z - gamma * u - gamma * grad
            b = np.empty(width)
            b[:p] = prox_slope(step[:p], gamma * pen_v)
            if has_intercept_coord:
                b[p:] = step[p:]
            diff = b - z
            model = fz + float(grad @ diff) + 0.5 * float(diff @ diff) / gamma
            if loss.value(b, x, y) <= model + 1e-12 * max(1.0, abs(fz)):
                break
            gamma *= config.eta
        else:
            raise BacktrackingFailure(
                f"no majorizing step after {_BACKTRACK_LIMIT} shrinks"
            )
        z_next = np.empty(width)
        z_next[:p] = prox_gslope_transformed(
            b[:p], u[:p], gamma, pen_w, scaling, partition
        )
        if has_intercept_coord:
            z_next[p:] = b[p:] + gamma * u[p:]
        # ||b - z|| alone is a false certificate: it vanishes at any stale
        # warm-start point whose dual vector has not settled. ||b - z_next||
        # is gamma times the dual movement, so both must be small.
        residual = max(
            float(np.linalg.norm(b - z)), float(np.linalg.norm(b - z_next))
        )
        z_used, u_used = z, u
        u = u + (b - z_next) / gamma
        z = z_next
        # A small residual alone can certify a point whose marginal groups
        # are still draining toward zero: their per-iteration movement sits
        # below the tolerance even as they lose most of their mass each
        # round. Stop only once the surviving-group set repeats itself and
        # no survivor halved since the last iteration.
        norms, norms_prev = partition.group_norms(z[:p]), norms
        alive = norms > 0.0
        if residual <= config.tolerance and norms_prev is not None:
            settled = np.array_equal(alive, norms_prev > 0.0) and not np.any(
                norms[alive] < 0.5 * norms_prev[alive]
            )
            if settled:
                converged = True
                break

    # The slope image b can hold sub-tolerance remnants on coordinates
    # whose whole group the final group-level image z has already killed;
    # at the fixed point the two images share a support, so those
    # coordinates are genuine zeros.
    if norms is None:
        norms = partition.group_norms(z[:p])
    b[:p] = np.where((norms > 0.0)[partition.group_of], b[:p], 0.0)

    def certified(vec: np.ndarray) -> float:
        coef, _ = recover(vec)
        return (
            loss.value(vec, x, y)
            + sorted_l1_penalty(coef, pen_v)
            + group_sorted_l1_penalty(coef, pen_w, partition)
        )

    # Survivors whose whole mass is on the residual scale get a descent
    # test: when zeroing the group does not raise the objective, the group
    # is a remnant of the stopped iteration, not support.
    objective = certified(b)
    if np.isfinite(residual):
        small = partition.group_norms(b[:p])
        cand = np.flatnonzero((small > 0.0) & (small <= 10.0 * residual))
        for g in cand[np.argsort(small[cand])]:
            trial = b.copy()
            trial[partition.members[g]] = 0.0
            contender = certified(trial)
            if contender <= objective + 1e-12 * max(1.0, abs(objective)):
                b, objective = trial, contender

    beta, intercept = recover(b)
    selected = np.flatnonzero(beta != 0.0)
    groups = np.unique(partition.group_of[selected])
    return SgsSolution(
        beta=beta,
        intercept=intercept,
        selected_variables=selected,
        selected_groups=groups,
        iterations=iterations,
        converged=converged,
        final_residual=residual,
        objective=objective,
        z=z_used,
        u=u_used,
        gamma=gamma,
        warm_z=z,
        warm_u=u,
    )


def objective_value(
    data: GroupedDataset, spec: PenaltySpec, beta, intercept: float = 0.0
) -> float:
    """Penalized objective at (beta, intercept) on the data as given."""
    beta = np.asarray(beta, dtype=np.float64)
    loss = make_loss(data.family)
    eta_shift = np.full(data.n_samples, float(intercept))
    if data.family is Family.gaussian:
        smooth = loss.value(beta, data.x, data.y - eta_shift)
    else:
        x_aug = np.hstack([data.x, np.ones((data.n_samples, 1))])
        smooth = loss.value(np.append(beta, intercept), x_aug, data.y)
    return (
        smooth
        + sorted_l1_penalty(beta, spec.effective_variable_weights())
        + group_sorted_l1_penalty(
            beta, spec.effective_group_weights(), data.partition
        )
    )


def _sequences_rescale_with_lambda(
    alpha: float, variable_kind, group_kind
) -> bool:
    """True when per-lambda regeneration of the sequences is well posed.

    The lambda-scaled bi-level forms make their side of the penalty
    invariant to lambda, so a path can only terminate in the null model if
    the other side is a fixed kind with positive mixing weight. When no
    side diverges, paths instead scale fixed theorem-scale sequences
    multiplicatively.
    """
    var_fixed = VariableKind(variable_kind) is VariableKind.bh
    grp_fixed = GroupKind(group_kind) in (GroupKind.gslope_max, GroupKind.gslope_mean)
    unbounded = (var_fixed and alpha > 0.0) or (grp_fixed and alpha < 1.0)
    return unbounded and not (var_fixed and grp_fixed)


def spec_for_lambda(
    data: GroupedDataset,
    alpha: float,
    q_v: float,
    q_g: float,
    variable_kind=VariableKind.vmean,
    group_kind=GroupKind.gslope_mean,
    *,
    lam: float,
    quantile_denominator: int | None = None,
    base: PenaltySpec | None = None,
) -> PenaltySpec:
    """Penalty spec at one path position.

    Regenerates the bi-level sequences at the theorem scale n*lam when
    that is well posed (see _sequences_rescale_with_lambda); otherwise
    reuses fixed theorem-scale sequences (`base`, built on demand) and
    only moves lam.
    """
    if _sequences_rescale_with_lambda(alpha, variable_kind, group_kind):
        return build_penalty_spec(
            data.partition, alpha, lam, q_v, q_g, variable_kind, group_kind,
            n_samples=data.n_samples,
            quantile_denominator=quantile_denominator,
        )
    if base is None:
        base = build_penalty_spec(
            data.partition, alpha, 1.0, q_v, q_g, variable_kind, group_kind,
            quantile_denominator=quantile_denominator,
        )
    return replace(base, lam=lam)


def _null_gradient(data: GroupedDataset, fit_intercept: bool) -> np.ndarray:
    """Loss gradient over the penalized coordinates at the null model."""
    x, y, loss, has_intercept_coord, _ = _working_problem(data, fit_intercept)
    if data.family is Family.binomial and fit_intercept:
        rate = min(max(float(y.mean()), 1e-10), 1.0 - 1e-10)
        eta0 = np.log(rate / (1.0 - rate))
        grad = x.T @ (expit(np.full(y.size, eta0)) - y) / y.size
    else:
        grad = loss.gradient(np.zeros(x.shape[1]), x, y)
    p = data.n_variables
    return grad[:p]


def lambda_max(
    data: GroupedDataset,
    alpha: float,
    q_v: float,
    q_g: float,
    variable_kind=VariableKind.vmean,
    group_kind=GroupKind.gslope_mean,
    config: SolverConfig | None = None,
    *,
    quantile_denominator: int | None = None,
) -> float:
    """Smallest certified lambda at which the fit is the null model.

    Either penalty alone is enough to zero the fit once its smallest
    weight dominates the matching null-model correlation, so the start is
    the minimum over the per-side bounds; a side only qualifies if its
    weights scale with lambda (its sequences are not regenerated per
    lambda) and its tail weight is positive. Doubling from there certifies
    with an actual fit.
    """
    config = config or SolverConfig()
    base = build_penalty_spec(
        data.partition, alpha, 1.0, q_v, q_g, variable_kind, group_kind,
        quantile_denominator=quantile_denominator,
    )
    regenerating = _sequences_rescale_with_lambda(alpha, variable_kind,
                                                  group_kind)
    var_scales = (
        VariableKind(variable_kind) is VariableKind.bh or not regenerating
    )
    grp_scales = (
        GroupKind(group_kind) in (GroupKind.gslope_max, GroupKind.gslope_mean)
        or not regenerating
    )
    grad0 = _null_gradient(data, config.fit_intercept)
    candidates = []
    if alpha > 0 and var_scales and base.v.values[-1] > 0:
        candidates.append(
            np.max(np.abs(grad0)) / (alpha * base.v.values[-1])
        )
    if alpha < 1 and grp_scales and base.w.values[-1] > 0:
        norms = data.partition.group_norms(grad0)
        scaled = norms / np.sqrt(data.partition.sizes)
        candidates.append(np.max(scaled) / ((1.0 - alpha) * base.w.values[-1]))
    lam = max(float(np.min(candidates)) if candidates else 1.0, 1e-12)
    for _ in range(100):
        spec = spec_for_lambda(
            data, alpha, q_v, q_g, variable_kind, group_kind,
            lam=lam, quantile_denominator=quantile_denominator, base=base,
        )
        solution = atos_fit(data, spec, config)
        if solution.converged and solution.selected_variables.size == 0:
            return lam
        lam *= 2.0
    raise SgsError("could not certify a null-model lambda by doubling")


def fit_path(
    data: GroupedDataset,
    alpha: float,
    q_v: float,
    q_g: float,
    variable_kind=VariableKind.vmean,
    group_kind=GroupKind.gslope_mean,
    path_length: int = 20,
    min_ratio: float = 0.1,
    config: SolverConfig | None = None,
    *,
    lambdas: np.ndarray | None = None,
    specs: list[PenaltySpec] | None = None,
    quantile_denominator: int | None = None,
) -> list[tuple[float, SgsSolution]]:
    """Warm-started fits along a log-linear lambda path.

    The path runs from a certified null-model lambda down to
    min_ratio times it (or along explicit `lambdas`). Sequences are
    regenerated per lambda where that is well posed; see spec_for_lambda.
    """
    config = config or SolverConfig()
    if lambdas is None:
        if path_length < 2:
            raise ValueError("path_length must be >= 2")
        if not 0.0 < min_ratio < 1.0:
            raise ValueError("min_ratio must be in (0, 1)")
        top = lambda_max(
            data, alpha, q_v, q_g, variable_kind, group_kind, config,
            quantile_denominator=quantile_denominator,
        )
        lambdas = np.geomspace(top, min_ratio * top, path_length)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if specs is None:
        base = build_penalty_spec(
            data.partition, alpha, 1.0, q_v, q_g, variable_kind, group_kind,
            quantile_denominator=quantile_denominator,
        )
        specs = [
            spec_for_lambda(
                data, alpha, q_v, q_g, variable_kind, group_kind,
                lam=lam, quantile_denominator=quantile_denominator, base=base,
            )
            for lam in lambdas
        ]
    if len(specs) != lambdas.size:
        raise DimensionMismatch("specs and lambdas must align")
    out: list[tuple[float, SgsSolution]] = []
    z0 = u0 = None
    support = 0
    for lam, spec in zip(lambdas, specs):
        solution = atos_fit(data, spec, config, z0=z0, u0=u0)
        out.append((float(lam), solution))
        z0, u0 = solution.warm_z, solution.warm_u
        size = solution.selected_variables.size
        if size < support:
            # Routine for sorted penalties; logged for path debugging only.
            log.debug(
                "support shrank from %d to %d at lambda=%.3g on the path",
                support, size, lam,
            )
        support = size
    return out


def predict(solution: SgsSolution, x_new, family: Family = Family.gaussian):
    """Linear predictions (Gaussian) or class probabilities (binomial)."""
    x_new = np.asarray(x_new, dtype=np.float64)
    if x_new.ndim != 2 or x_new.shape[1] != solution.beta.size:
        raise DimensionMismatch(
            f"design has {x_new.shape[-1]} columns, fit used "
            f"{solution.beta.size}"
        )
    eta = x_new @ solution.beta + solution.intercept
    if Family(family) is Family.gaussian:
        return eta
    return expit(eta)


def predict_labels(solution: SgsSolution, x_new) -> np.ndarray:
    """Hard 0/1 labels for a binomial fit at the 0.5 threshold."""
    return (predict(solution, x_new, Family.binomial) >= 0.5).astype(np.int64)
