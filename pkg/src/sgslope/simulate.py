"""Synthetic benchmarks: orthogonal FDR experiments and correlated-design
selection studies.

Every draw flows from a scenario seed, and experiment harnesses derive one
child seed per replicate from (root seed, cell indices, replicate index),
so reports are reproducible bit for bit regardless of thread count or
scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .data import Family, GroupedDataset, GroupPartition
from .errors import InconsistentScenario, SgsError
from .metrics import compute_metrics
from .parallel import parallel_map
from .selection import adaptively_scaled_sgs, cross_validate, scaled_sgs
from .sequences import GroupKind, VariableKind, build_penalty_spec
from .solver import SolverConfig, atos_fit, spec_for_lambda

Seed = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class EvenGrouping:
    group_count: int
    size: int

    def group_sizes(self) -> np.ndarray:
        return np.full(self.group_count, self.size, dtype=np.int64)


@dataclass(frozen=True)
class UnevenBands:
    """`groups_per_size` groups of every size in `sizes`."""

    sizes: tuple[int, ...]
    groups_per_size: int

    def group_sizes(self) -> np.ndarray:
        return np.repeat(
            np.asarray(self.sizes, dtype=np.int64), self.groups_per_size
        )


@dataclass(frozen=True)
class OrthogonalScenario:
    """Identity-design benchmark: y = beta + noise, unit noise.

    `group_sparsity` is the proportion of INACTIVE groups; within each
    active group a `within_active_fraction` share of variables (at least
    one) carries signal beta_i = signal_scale * delta * sqrt(2 log p) with
    standard normal delta.
    """

    p: int
    grouping: EvenGrouping | UnevenBands
    group_sparsity: float
    within_active_fraction: float = 0.6
    signal_scale: float = 5.0
    seed: Seed = 0

    @property
    def variable_sparsity(self) -> float:
        """Implied proportion of inactive variables (uneven layouts vary
        slightly with which groups are drawn; this uses the average)."""
        sizes = self.grouping.group_sizes()
        k = _active_group_count(self.group_sparsity, sizes.size)
        per_group = np.maximum(
            1, np.floor(self.within_active_fraction * sizes).astype(np.int64)
        )
        return 1.0 - k * float(per_group.mean()) / self.p


@dataclass(frozen=True)
class FixedSignal:
    value: float = 5.0


@dataclass(frozen=True)
class RandomSignal:
    sd: float = 5.0


@dataclass(frozen=True)
class CorrelatedScenario:
    """Block-correlated Gaussian design with noise set from a target SNR.

    Rows are drawn from a block-diagonal covariance with unit diagonal and
    within-group correlation rho. The noise scale solves
    Var(X beta)/sigma^2 = snr on the realized draw; a signal-free draw
    pins sigma = 1.
    """

    n: int
    group_sizes: tuple[int, ...]
    rho: float
    signal: FixedSignal | RandomSignal = FixedSignal()
    snr: float = 6.0
    group_sparsity: float = 0.9
    within_active_fraction: float = 0.6
    seed: Seed = 0

    @property
    def p(self) -> int:
        return int(sum(self.group_sizes))


@dataclass(frozen=True)
class SimulationReport:
    """Tidy per-replicate rows plus per-cell aggregates and the scenario
    echo; standard errors are sample std over sqrt(replicates)."""

    scenario: dict
    rows: tuple[dict, ...]
    aggregates: tuple[dict, ...]
    failures: tuple[dict, ...] = ()


def _check_proportion(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise InconsistentScenario(f"{name} must lie in [0, 1], got {value}")


def _active_group_count(group_sparsity: float, m: int) -> int:
    return int(np.rint((1.0 - group_sparsity) * m))


def _choose_active_groups(rng, partition: GroupPartition, k: int) -> np.ndarray:
    """Sample k active groups, stratified across the distinct size bands.

    Quotas are proportional to band size (largest remainder), then any
    shortfall from capacity limits is filled by random eligible bands, and
    members are drawn uniformly within each band.
    """
    sizes = partition.sizes
    m = partition.n_groups
    if k == 0:
        return np.empty(0, dtype=np.int64)
    bands = [np.flatnonzero(sizes == s) for s in np.unique(sizes)]
    quota = np.array([k * band.size / m for band in bands])
    take = np.floor(quota).astype(np.int64)
    while take.sum() < k:
        room = np.flatnonzero(take < np.array([b.size for b in bands]))
        frac = (quota - take)[room]
        best = room[frac == frac.max()]
        pick = best[0] if best.size == 1 else rng.choice(best)
        take[pick] += 1
    chosen = [
        rng.choice(band, size=int(t), replace=False)
        for band, t in zip(bands, take)
        if t > 0
    ]
    return np.sort(np.concatenate(chosen)).astype(np.int64)


def _place_active_variables(
    rng, partition: GroupPartition, active_groups, fraction: float
) -> np.ndarray:
    picked = []
    for g in active_groups:
        members = partition.members[g]
        count = max(1, int(np.floor(fraction * members.size)))
        picked.append(rng.choice(members, size=count, replace=False))
    if not picked:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(picked)).astype(np.int64)


def generate_orthogonal(
    scenario: OrthogonalScenario,
) -> tuple[GroupedDataset, np.ndarray]:
    """Draw one identity-design dataset and its true coefficient vector."""
    sizes = scenario.grouping.group_sizes()
    if int(sizes.sum()) != scenario.p:
        raise InconsistentScenario(
            f"grouping covers {int(sizes.sum())} variables, scenario says "
            f"{scenario.p}"
        )
    _check_proportion("group_sparsity", scenario.group_sparsity)
    _check_proportion("within_active_fraction", scenario.within_active_fraction)
    partition = GroupPartition.from_sizes(sizes)
    rng = np.random.default_rng(scenario.seed)
    k = _active_group_count(scenario.group_sparsity, partition.n_groups)
    active_groups = _choose_active_groups(rng, partition, k)
    active_vars = _place_active_variables(
        rng, partition, active_groups, scenario.within_active_fraction
    )
    beta = np.zeros(scenario.p)
    if active_vars.size:
        delta = rng.standard_normal(active_vars.size)
        beta[active_vars] = (
            scenario.signal_scale * delta * np.sqrt(2.0 * np.log(scenario.p))
        )
    y = beta + rng.standard_normal(scenario.p)
    data = GroupedDataset(
        x=np.eye(scenario.p), y=y, partition=partition, family=Family.gaussian
    )
    return data, beta


def generate_correlated(
    scenario: CorrelatedScenario,
) -> tuple[GroupedDataset, np.ndarray]:
    """Draw one block-correlated dataset and its true coefficient vector."""
    if not 0.0 <= scenario.rho < 1.0:
        raise InconsistentScenario(f"rho must lie in [0, 1), got {scenario.rho}")
    if scenario.snr <= 0:
        raise InconsistentScenario("snr must be positive")
    _check_proportion("group_sparsity", scenario.group_sparsity)
    _check_proportion("within_active_fraction", scenario.within_active_fraction)
    partition = GroupPartition.from_sizes(np.asarray(scenario.group_sizes))
    p, n = scenario.p, scenario.n
    rng = np.random.default_rng(scenario.seed)
    shared = rng.standard_normal((n, partition.n_groups))
    idio = rng.standard_normal((n, p))
    x = (
        np.sqrt(scenario.rho) * shared[:, partition.group_of]
        + np.sqrt(1.0 - scenario.rho) * idio
    )
    k = _active_group_count(scenario.group_sparsity, partition.n_groups)
    active_groups = _choose_active_groups(rng, partition, k)
    active_vars = _place_active_variables(
        rng, partition, active_groups, scenario.within_active_fraction
    )
    beta = np.zeros(p)
    if active_vars.size:
        if isinstance(scenario.signal, FixedSignal):
            beta[active_vars] = scenario.signal.value
        else:
            beta[active_vars] = rng.normal(0.0, scenario.signal.sd,
                                           active_vars.size)
    signal = x @ beta
    signal_var = float(np.var(signal))
    sigma = np.sqrt(signal_var / scenario.snr) if signal_var > 0 else 1.0
    y = signal + sigma * rng.standard_normal(n)
    data = GroupedDataset(x=x, y=y, partition=partition, family=Family.gaussian)
    return data, beta


def _scenario_echo(scenario) -> dict:
    out = {"type": type(scenario).__name__}
    for name, value in vars(scenario).items():
        if name == "seed":
            out[name] = str(value)
        elif isinstance(value, (EvenGrouping, UnevenBands, FixedSignal,
                                RandomSignal)):
            out[name] = {"type": type(value).__name__, **vars(value)}
        else:
            out[name] = value
    return out


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def run_fdr_experiment(
    scenario: OrthogonalScenario,
    q_levels,
    replicates: int,
    seed: int,
    *,
    group_sparsity_grid=None,
    variable_kind=VariableKind.vmax,
    group_kind=GroupKind.gmax,
    lam: float | None = None,
    alpha: float | None = None,
    config: SolverConfig | None = None,
    threads: int | None = None,
) -> SimulationReport:
    """Monte-Carlo false-discovery study on the orthogonal benchmark.

    For every (q, group-sparsity) cell the same penalty spec is reused
    (the sequences depend only on the layout, alpha, and the scale), each
    replicate draws fresh data from a child seed, and variable/group FDR
    and sensitivity are averaged with Monte-Carlo standard errors. The fit
    runs at lam = 1/n by default with alpha equal to the within-active
    fraction, which puts the problem exactly on the scale the FDR bounds
    address.
    """
    if replicates < 1:
        raise InconsistentScenario("replicates must be >= 1")
    grid = (
        [scenario.group_sparsity]
        if group_sparsity_grid is None
        else list(group_sparsity_grid)
    )
    q_levels = list(q_levels)
    alpha = scenario.within_active_fraction if alpha is None else alpha
    config = config or SolverConfig(fit_intercept=False)
    n = scenario.p
    lam = 1.0 / n if lam is None else lam

    partition = GroupPartition.from_sizes(scenario.grouping.group_sizes())
    specs = {
        q: build_penalty_spec(
            partition, alpha, lam, q, q, variable_kind, group_kind,
            n_samples=n,
        )
        for q in q_levels
    }

    tasks = [
        (qi, gi, rep)
        for qi in range(len(q_levels))
        for gi in range(len(grid))
        for rep in range(replicates)
    ]

    def one(task):
        qi, gi, rep = task
        q, sparsity = q_levels[qi], grid[gi]
        child = np.random.SeedSequence(seed, spawn_key=(qi, gi, rep))
        data, beta = generate_orthogonal(
            replace(scenario, group_sparsity=sparsity, seed=child)
        )
        try:
            solution = atos_fit(data, specs[q], config)
        except SgsError as exc:
            return {
                "q": q, "group_sparsity": sparsity, "replicate": rep,
                "error": f"{type(exc).__name__}: {exc}",
            }
        scored = compute_metrics(beta, solution, partition)
        active = int(np.sum(beta != 0.0))
        active_groups = int(np.sum(partition.group_norms(beta) > 0))
        return {
            "q": q,
            "group_sparsity": sparsity,
            "replicate": rep,
            "seed_key": f"{seed}:{qi}.{gi}.{rep}",
            "vfdr": scored.variable.fdr,
            "gfdr": scored.group.fdr,
            "vsensitivity": scored.variable.sensitivity,
            "gsensitivity": scored.group.sensitivity,
            "selected_variables": scored.variable.selected,
            "selected_groups": scored.group.selected,
            "null_variables": partition.n_variables - active,
            "null_groups": partition.n_groups - active_groups,
            "converged": bool(solution.converged),
        }

    results = parallel_map(one, tasks, threads)
    rows = [r for r in results if "error" not in r]
    failures = [r for r in results if "error" in r]

    aggregates = []
    for qi, q in enumerate(q_levels):
        for gi, sparsity in enumerate(grid):
            cell = [
                r for r in rows
                if r["q"] == q and r["group_sparsity"] == sparsity
            ]
            entry = {
                "q": q,
                "group_sparsity": sparsity,
                "replicates": len(cell),
                "failures": replicates - len(cell),
            }
            for key in ("vfdr", "gfdr", "vsensitivity", "gsensitivity",
                        "selected_variables", "selected_groups"):
                mean, se = _mean_se([r[key] for r in cell])
                entry[f"mean_{key}"] = mean
                entry[f"se_{key}"] = se
            p0 = float(np.mean([r["null_variables"] for r in cell]))
            m0 = float(np.mean([r["null_groups"] for r in cell]))
            entry["mean_null_variables"] = p0
            entry["mean_null_groups"] = m0
            entry["vfdr_bound"] = q * p0 / partition.n_variables
            entry["gfdr_bound"] = q * m0 / partition.n_groups
            aggregates.append(entry)

    return SimulationReport(
        scenario=_scenario_echo(scenario),
        rows=tuple(rows),
        aggregates=tuple(aggregates),
        failures=tuple(failures),
    )


@dataclass(frozen=True)
class ModelSetup:
    """One competitor in a selection study: a penalty layout plus the rule
    that picks its scale (cv-1se, cv-min, scaled, or adaptive)."""

    name: str
    alpha: float
    q_v: float = 0.1
    q_g: float = 0.1
    variable_kind: VariableKind = VariableKind.vmean
    group_kind: GroupKind = GroupKind.gslope_mean
    selector: str = "cv-1se"
    folds: int = 10
    path_length: int = 20
    min_ratio: float = 0.1

    def __post_init__(self):
        if self.selector not in ("cv-1se", "cv-min", "scaled", "adaptive"):
            raise InconsistentScenario(
                f"unknown selector {self.selector!r}"
            )


def _fit_model(model: ModelSetup, data: GroupedDataset,
               config: SolverConfig, rep_seed: int):
    if model.selector in ("cv-1se", "cv-min"):
        cv = cross_validate(
            data, model.alpha, model.q_v, model.q_g,
            model.variable_kind, model.group_kind,
            folds=model.folds, path_length=model.path_length,
            min_ratio=model.min_ratio, config=config, seed=rep_seed,
        )
        if model.selector == "cv-min":
            index = cv.lambda_min_index
            spec = spec_for_lambda(
                data, model.alpha, model.q_v, model.q_g,
                model.variable_kind, model.group_kind,
                lam=float(cv.lambdas[index]),
            )
            return atos_fit(data, spec, config)
        return cv.chosen
    if model.selector == "scaled":
        _, solution = scaled_sgs(
            data, model.alpha, model.q_v, model.q_g,
            model.variable_kind, model.group_kind, config,
        )
        return solution
    _, solution = adaptively_scaled_sgs(
        data, model.alpha, model.q_v, model.q_g, config
    )
    return solution


def run_selection_study(
    scenario: CorrelatedScenario,
    models,
    replicates: int,
    seed: int,
    *,
    config: SolverConfig | None = None,
    threads: int | None = None,
) -> SimulationReport:
    """Compare model-selection rules on shared correlated-design draws.

    Each replicate draws one dataset from a child seed and every model is
    fit to that same draw; rows carry coefficient-error (MSE/MAE to the
    truth) and variable/group selection rates, aggregated per model.
    """
    if replicates < 1:
        raise InconsistentScenario("replicates must be >= 1")
    models = list(models)
    config = config or SolverConfig()

    def one(rep: int):
        child = np.random.SeedSequence(seed, spawn_key=(rep,))
        data, beta = generate_correlated(replace(scenario, seed=child))
        fold_entropy = np.random.SeedSequence(seed, spawn_key=(rep, 1))
        rep_seed = int(fold_entropy.generate_state(1)[0])
        out = []
        for model in models:
            try:
                solution = _fit_model(model, data, config, rep_seed)
            except SgsError as exc:
                out.append({
                    "model": model.name, "replicate": rep,
                    "error": f"{type(exc).__name__}: {exc}",
                })
                continue
            scored = compute_metrics(beta, solution, data.partition)
            out.append({
                "model": model.name,
                "replicate": rep,
                "seed_key": f"{seed}:{rep}",
                "mse": float(np.mean((solution.beta - beta) ** 2)),
                "mae": float(np.mean(np.abs(solution.beta - beta))),
                "vfdr": scored.variable.fdr,
                "gfdr": scored.group.fdr,
                "vsensitivity": scored.variable.sensitivity,
                "gsensitivity": scored.group.sensitivity,
                "vf1": scored.variable.f1,
                "gf1": scored.group.f1,
                "selected_variables": scored.variable.selected,
                "selected_groups": scored.group.selected,
            })
        return out

    results = [row for chunk in parallel_map(one, range(replicates), threads)
               for row in chunk]
    rows = [r for r in results if "error" not in r]
    failures = [r for r in results if "error" in r]

    aggregates = []
    for model in models:
        cell = [r for r in rows if r["model"] == model.name]
        entry = {
            "model": model.name,
            "replicates": len(cell),
            "failures": replicates - len(cell),
        }
        for key in ("mse", "mae", "vfdr", "gfdr", "vsensitivity",
                    "gsensitivity", "vf1", "gf1",
                    "selected_variables", "selected_groups"):
            mean, se = _mean_se([r[key] for r in cell])
            entry[f"mean_{key}"] = mean
            entry[f"se_{key}"] = se
        aggregates.append(entry)

    return SimulationReport(
        scenario=_scenario_echo(scenario),
        rows=tuple(rows),
        aggregates=tuple(aggregates),
        failures=tuple(failures),
    )


def preset_scenario(name: str):
    """Named desk-scale scenarios used by the command line."""
    bands = tuple(range(3, 8))
    if name == "ortho-even":
        return OrthogonalScenario(
            p=500, grouping=EvenGrouping(100, 5), group_sparsity=0.9
        )
    if name == "ortho-uneven":
        return OrthogonalScenario(
            p=200, grouping=UnevenBands(bands, 8), group_sparsity=0.9
        )
    if name == "corr-fixed":
        return CorrelatedScenario(
            n=100, group_sizes=bands * 8, rho=0.3, signal=FixedSignal(5.0)
        )
    if name == "corr-random":
        return CorrelatedScenario(
            n=100, group_sizes=bands * 8, rho=0.3, signal=RandomSignal(5.0)
        )
    if name == "corr-largegroups":
        sizes = tuple(int(s) for s in np.rint(np.linspace(5, 75, 25)))
        return CorrelatedScenario(
            n=200, group_sizes=sizes, rho=0.3, signal=RandomSignal(5.0)
        )
    if name == "null":
        return CorrelatedScenario(
            n=100, group_sizes=bands * 8, rho=0.3, signal=FixedSignal(5.0),
            group_sparsity=1.0,
        )
    raise InconsistentScenario(f"unknown preset {name!r}")
