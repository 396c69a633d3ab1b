"""Choosing the penalty scale: cross-validation and noise-driven scaling.

Three routes are provided. `cross_validate` scores a shared lambda path
across folds and refits at the one-standard-error choice. `scaled_sgs`
alternates between fitting and re-estimating the noise level, moving
lambda proportionally while keeping the weight sequences fixed.
`adaptively_scaled_sgs` goes further and regenerates the lambda-dependent
bi-level sequences from the current residual scale each round, iterating
until the selected support stops changing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .data import Family, GroupedDataset
from .errors import DegenerateResidual, FoldTooSmall, SgsError, UsageError
from .parallel import parallel_map
from .sequences import GroupKind, VariableKind, build_penalty_spec
from .solver import (
    SgsSolution,
    SolverConfig,
    atos_fit,
    fit_path,
    lambda_max,
    predict,
    spec_for_lambda,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CvResult:
    """Cross-validation record: the shared path, per-fold scores, and the
    full-data refit at the one-standard-error lambda."""

    lambdas: np.ndarray
    fold_errors: np.ndarray
    mean_error: np.ndarray
    std_error: np.ndarray
    lambda_min_index: int
    lambda_1se_index: int
    chosen: SgsSolution
    fold_misclassification: np.ndarray | None = None
    failures: tuple[tuple[int, str], ...] = ()

    @property
    def lambda_min(self) -> float:
        return float(self.lambdas[self.lambda_min_index])

    @property
    def lambda_1se(self) -> float:
        return float(self.lambdas[self.lambda_1se_index])


@dataclass(frozen=True)
class NoiseEstimate:
    """Outcome of a noise-scaling loop.

    lambda_hat is on the same scale the fit used, so refitting at it (with
    the matching procedure) reproduces `support` whenever converged=True.
    """

    lambda_hat: float
    support: np.ndarray
    rss: float
    iterations: int
    converged: bool


def _subset_rows(data: GroupedDataset, rows: np.ndarray) -> GroupedDataset:
    return GroupedDataset(
        x=data.x[rows], y=data.y[rows],
        partition=data.partition, family=data.family,
    )


def _prediction_error(solution, data: GroupedDataset):
    """Mean squared error (Gaussian) or mean deviance plus the
    misclassification rate (binomial)."""
    if data.family is Family.gaussian:
        fitted = predict(solution, data.x, Family.gaussian)
        return float(np.mean((data.y - fitted) ** 2)), None
    eta = data.x @ solution.beta + solution.intercept
    deviance = 2.0 * float(np.mean(np.logaddexp(0.0, eta) - data.y * eta))
    wrong = float(np.mean((eta >= 0.0).astype(float) != data.y))
    return deviance, wrong


def cross_validate(
    data: GroupedDataset,
    alpha: float,
    q_v: float,
    q_g: float,
    variable_kind=VariableKind.vmean,
    group_kind=GroupKind.gslope_mean,
    folds: int = 10,
    path_length: int = 20,
    min_ratio: float = 0.1,
    config: SolverConfig | None = None,
    seed: int = 0,
    *,
    threads: int | None = None,
    quantile_denominator: int | None = None,
) -> CvResult:
    """K-fold cross-validation over a shared log-linear lambda path.

    The path and its penalty specs are built once from the full data, every
    fold is scored on that path, and the final model is refit on all rows
    at the largest lambda whose mean error is within one standard error of
    the minimum. Fold assignment is a seeded permutation split into
    near-equal blocks. Per-fold fit failures are recorded and the fold is
    dropped from the averages rather than aborting the run.
    """
    config = config or SolverConfig()
    n = data.n_samples
    if folds < 2 or folds > n:
        raise FoldTooSmall(f"cannot make {folds} folds from {n} rows")
    fold_ids = np.array_split(np.random.default_rng(seed).permutation(n), folds)
    if n - max(block.size for block in fold_ids) < 2:
        raise FoldTooSmall("a training split would have fewer than 2 rows")

    top = lambda_max(
        data, alpha, q_v, q_g, variable_kind, group_kind, config,
        quantile_denominator=quantile_denominator,
    )
    lambdas = np.geomspace(top, min_ratio * top, path_length)
    # Sequence scales reuse the full-data row count so every fold prices
    # the same penalty.
    specs = [
        spec_for_lambda(
            data, alpha, q_v, q_g, variable_kind, group_kind,
            lam=lam, quantile_denominator=quantile_denominator,
        )
        for lam in lambdas
    ]

    def score_fold(block: np.ndarray):
        train = _subset_rows(data, np.setdiff1d(np.arange(n), block))
        val = _subset_rows(data, np.sort(block))
        path = fit_path(
            train, alpha, q_v, q_g, variable_kind, group_kind,
            config=config, lambdas=lambdas, specs=specs,
        )
        scored = [_prediction_error(sol, val) for _, sol in path]
        return (
            np.array([s[0] for s in scored]),
            None
            if data.family is Family.gaussian
            else np.array([s[1] for s in scored]),
        )

    fold_errors = np.full((path_length, folds), np.nan)
    fold_wrong = np.full((path_length, folds), np.nan)
    failures: list[tuple[int, str]] = []
    results = parallel_map(
        lambda pair: _guarded(score_fold, pair[1]),
        list(enumerate(fold_ids)),
        threads,
    )
    for k, outcome in enumerate(results):
        if isinstance(outcome, str):
            failures.append((k, outcome))
            continue
        errors, wrong = outcome
        fold_errors[:, k] = errors
        if wrong is not None:
            fold_wrong[:, k] = wrong

    counts = np.sum(~np.isnan(fold_errors), axis=1)
    if not np.all(counts >= 2):
        raise FoldTooSmall("fewer than 2 folds produced scores")
    mean_error = np.nanmean(fold_errors, axis=1)
    std_error = np.nanstd(fold_errors, axis=1, ddof=1) / np.sqrt(counts)

    lambda_min_index = int(np.argmin(mean_error))
    threshold = mean_error[lambda_min_index] + std_error[lambda_min_index]
    lambda_1se_index = int(np.argmax(mean_error <= threshold))
    chosen = atos_fit(data, specs[lambda_1se_index], config)
    return CvResult(
        lambdas=lambdas,
        fold_errors=fold_errors,
        mean_error=mean_error,
        std_error=std_error,
        lambda_min_index=lambda_min_index,
        lambda_1se_index=lambda_1se_index,
        chosen=chosen,
        fold_misclassification=(
            None if data.family is Family.gaussian else fold_wrong
        ),
        failures=tuple(failures),
    )


def _guarded(fn, item):
    try:
        return fn(item)
    except SgsError as exc:
        return f"{type(exc).__name__}: {exc}"


def _residual_sum_of_squares(solution, data: GroupedDataset) -> float:
    fitted = data.x @ solution.beta + solution.intercept
    return float(np.sum((data.y - fitted) ** 2))


def scaled_sgs(
    data: GroupedDataset,
    alpha: float,
    q_v: float,
    q_g: float,
    variable_kind=VariableKind.vmean,
    group_kind=GroupKind.gslope_mean,
    config: SolverConfig | None = None,
    max_rounds: int = 100,
    *,
    lambda_base: float | None = None,
    sigma0: float | None = None,
    tol: float = 1e-6,
    quantile_denominator: int | None = None,
) -> tuple[NoiseEstimate, SgsSolution]:
    """Alternate sigma_hat^2 = RSS/n with lambda = sigma_hat * lambda_base.

    The weight sequences are built once and only the overall scale moves.
    lambda_base defaults to 1/n, placing a unit-noise fit on the scale the
    FDR theory prescribes. Starts from the intercept-only noise estimate
    unless sigma0 is given; stops when sigma_hat moves by less than `tol`
    relative, flagging converged=False at max_rounds otherwise.
    """
    if data.family is not Family.gaussian:
        raise UsageError("scaled fitting requires a Gaussian response")
    config = config or SolverConfig()
    n = data.n_samples
    if lambda_base is None:
        lambda_base = 1.0 / n
    base = build_penalty_spec(
        data.partition, alpha, 1.0, q_v, q_g, variable_kind, group_kind,
        quantile_denominator=quantile_denominator,
    )
    if sigma0 is None:
        center = data.y.mean() if config.fit_intercept else 0.0
        sigma = float(np.sqrt(np.mean((data.y - center) ** 2)))
    else:
        sigma = float(sigma0)

    solution = None
    lam = rss = None
    converged = False
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        lam = max(sigma, 1e-12) * lambda_base
        solution = atos_fit(
            data, replace(base, lam=lam), config,
            z0=None if solution is None else solution.warm_z,
            u0=None if solution is None else solution.warm_u,
        )
        rss = _residual_sum_of_squares(solution, data)
        sigma_new = float(np.sqrt(rss / n))
        if abs(sigma_new - sigma) <= tol * max(sigma, 1e-12):
            sigma = sigma_new
            converged = True
            break
        sigma = sigma_new
    estimate = NoiseEstimate(
        lambda_hat=float(lam),
        support=solution.selected_variables,
        rss=float(rss),
        iterations=rounds,
        converged=converged,
    )
    return estimate, solution


def _ols_rss(data: GroupedDataset, support, fit_intercept: bool) -> float:
    """Residual sum of squares of least squares on the support columns."""
    columns = [data.x[:, support]] if len(support) else []
    if fit_intercept:
        columns.append(np.ones((data.n_samples, 1)))
    if not columns:
        return float(data.y @ data.y)
    design = np.hstack(columns)
    coef, *_ = np.linalg.lstsq(design, data.y, rcond=None)
    resid = data.y - design @ coef
    return float(resid @ resid)


def adaptively_scaled_sgs(
    data: GroupedDataset,
    alpha: float,
    q_v: float,
    q_g: float,
    config: SolverConfig | None = None,
    max_rounds: int = 100,
    *,
    quantile_denominator: int | None = None,
) -> tuple[NoiseEstimate, SgsSolution]:
    """Noise-adaptive fitting that regenerates the sequences every round.

    From the current support S, least squares gives
    lambda_hat = RSS_S / (n - |S| - 1); the lambda-adjusted bi-level
    sequences are rebuilt at that scale, the model is refit, and the loop
    repeats until the support returns unchanged. A support seen twice
    means an oscillation: the loop stops at the smaller-RSS member of the
    cycle with converged=False and logs the pair.

    Raises
    ------
    DegenerateResidual
        When n - |S| - 1 drops below 1.
    """
    if data.family is not Family.gaussian:
        raise UsageError("adaptive scaling requires a Gaussian response")
    config = config or SolverConfig()
    n = data.n_samples
    support: tuple[int, ...] = ()
    seen: dict[tuple[int, ...], tuple[float, float, SgsSolution, float]] = {}
    solution = None
    rss = lam_hat = None
    for rounds in range(1, max_rounds + 1):
        df = n - len(support) - 1
        if df < 1:
            raise DegenerateResidual(
                f"support of size {len(support)} leaves {df} residual "
                f"degrees of freedom"
            )
        rss = _ols_rss(data, np.array(support, dtype=np.int64),
                       config.fit_intercept)
        lam_hat = max(rss / df, 1e-12)
        spec = build_penalty_spec(
            data.partition, alpha, lam_hat / n, q_v, q_g,
            VariableKind.vmax, GroupKind.gmax,
            n_samples=n, quantile_denominator=quantile_denominator,
        )
        solution = atos_fit(
            data, spec, config,
            z0=None if solution is None else solution.warm_z,
            u0=None if solution is None else solution.warm_u,
        )
        new_support = tuple(int(i) for i in solution.selected_variables)
        if new_support == support:
            estimate = NoiseEstimate(
                lambda_hat=float(lam_hat / n),
                support=solution.selected_variables,
                rss=float(rss),
                iterations=rounds,
                converged=True,
            )
            return estimate, solution
        seen[support] = (rss, lam_hat, solution, float(lam_hat / n))
        if new_support in seen:
            log.warning(
                "support cycle between %s and %s; keeping the smaller-RSS "
                "iterate", new_support, support,
            )
            prior_rss, _, prior_solution, prior_lam = seen[new_support]
            if prior_rss <= rss:
                pick, pick_rss, pick_lam = prior_solution, prior_rss, prior_lam
            else:
                pick, pick_rss, pick_lam = solution, rss, float(lam_hat / n)
            estimate = NoiseEstimate(
                lambda_hat=pick_lam,
                support=pick.selected_variables,
                rss=pick_rss,
                iterations=rounds,
                converged=False,
            )
            return estimate, pick
        support = new_support
    estimate = NoiseEstimate(
        lambda_hat=float(lam_hat / n),
        support=solution.selected_variables,
        rss=float(rss),
        iterations=max_rounds,
        converged=False,
    )
    return estimate, solution
