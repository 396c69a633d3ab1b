"""Command-line front end.

Six subcommands: `fit`, `path`, `cv`, `noise-est`, `penalties`, and
`simulate`. Every run writes a JSON result, plot-ready CSV tables, a PNG
rendering, and a manifest into the output directory (``--out``, or the
``SGSLOPE_OUT`` environment variable, or the working directory).

Exit codes: 0 success (including non-converged fits, which are reported
in the output), 2 usage errors with a message naming the offending flag,
1 runtime and input-content errors.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import Family, GroupedDataset, GroupPartition
from .dataio import load_design, load_groups, load_response
from .errors import SgsError, UsageError
from .reporting import RunManifest, write_csv, write_json
from .selection import adaptively_scaled_sgs, cross_validate, scaled_sgs
from .sequences import GroupKind, VariableKind, build_penalty_spec
from .simulate import (
    ModelSetup,
    OrthogonalScenario,
    preset_scenario,
    run_fdr_experiment,
    run_selection_study,
)
from .solver import SolverConfig, atos_fit, fit_path, spec_for_lambda

_VKINDS = [k.value for k in VariableKind]
_GKINDS = [k.value for k in GroupKind]
_PRESETS = ["ortho-even", "ortho-uneven", "corr-fixed", "corr-random",
            "corr-largegroups", "null"]


def parse_groups_spec(text: str) -> GroupPartition:
    """Compact group layouts: ``even<size>x<count>``,
    ``uneven<a>to<b>x<count>`` (sizes cycling a..b), or a comma list of
    group sizes."""
    match = re.fullmatch(r"even(\d+)x(\d+)", text)
    if match:
        size, count = int(match.group(1)), int(match.group(2))
        return GroupPartition.from_sizes(np.full(count, size))
    match = re.fullmatch(r"uneven(\d+)to(\d+)x(\d+)", text)
    if match:
        low, high, count = map(int, match.groups())
        if high < low:
            raise UsageError(f"--groups-spec: empty size range in {text!r}")
        return GroupPartition.from_sizes(
            np.resize(np.arange(low, high + 1), count)
        )
    if re.fullmatch(r"\d+(,\d+)*", text):
        return GroupPartition.from_sizes(
            np.array([int(s) for s in text.split(",")])
        )
    raise UsageError(f"--groups-spec: cannot parse {text!r}")


def _require_file(flag: str, value) -> Path:
    if value is None:
        raise UsageError(f"{flag} is required")
    path = Path(value)
    if not path.is_file():
        raise UsageError(f"{flag}: no such file: {path}")
    return path


def _load_data(args) -> tuple[GroupedDataset, dict]:
    x_path = _require_file("--x", args.x)
    y_path = _require_file("--y", args.y)
    inputs = {"x": x_path, "y": y_path}
    if args.groups is None and args.groups_spec is None:
        raise UsageError("--groups (or --groups-spec) is required")
    if args.groups is not None:
        g_path = _require_file("--groups", args.groups)
        partition = load_groups(g_path)
        inputs["groups"] = g_path
    else:
        partition = parse_groups_spec(args.groups_spec)
    x = load_design(x_path)
    y = load_response(y_path)
    data = GroupedDataset(
        x=x, y=y, partition=partition, family=Family(args.family)
    )
    return data, inputs


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        fit_intercept=not args.no_intercept,
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(args, out: Path, inputs: dict) -> None:
    flags = {
        k: v for k, v in vars(args).items() if k not in ("func", "command")
    }
    RunManifest.create(
        command=args.command,
        flags=flags,
        inputs=inputs,
        seed=getattr(args, "seed", None),
        version=__version__,
    ).write(out / "manifest.json")


def _solution_payload(solution) -> dict:
    return {
        "beta": solution.beta,
        "intercept": solution.intercept,
        "selected_variables": solution.selected_variables,
        "selected_groups": solution.selected_groups,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "final_residual": solution.final_residual,
        "objective": solution.objective,
    }


def _coefficient_rows(solution, partition) -> list[dict]:
    chosen = set(int(i) for i in solution.selected_variables)
    return [
        {
            "variable": j,
            "group": int(partition.group_of[j]),
            "coefficient": float(solution.beta[j]),
            "selected": int(j in chosen),
        }
        for j in range(partition.n_variables)
    ]


def cmd_fit(args) -> int:
    from .figures import save_coefficient_figure

    data, inputs = _load_data(args)
    spec = spec_for_lambda(
        data, args.alpha, args.q_v, args.q_g,
        VariableKind(args.variable_kind), GroupKind(args.group_kind),
        lam=args.lam,
    )
    solution = atos_fit(data, spec, _solver_config(args))
    out = _out_dir(args)
    write_json(
        {
            "command": "fit",
            "family": args.family,
            "alpha": args.alpha,
            "lam": args.lam,
            "q_v": args.q_v,
            "q_g": args.q_g,
            "variable_kind": args.variable_kind,
            "group_kind": args.group_kind,
            "solution": _solution_payload(solution),
            "penalty": {"v": spec.v.values, "w": spec.w.values},
        },
        out / "fit.json",
    )
    write_csv(_coefficient_rows(solution, data.partition),
              out / "coefficients.csv")
    save_coefficient_figure(solution, data.partition, out / "fit.png")
    _write_manifest(args, out, inputs)
    print(
        f"fit: {solution.selected_variables.size} variables in "
        f"{solution.selected_groups.size} groups selected; "
        f"objective {solution.objective:.6g}; "
        f"{'converged' if solution.converged else 'NOT converged'} "
        f"after {solution.iterations} iterations; wrote {out}"
    )
    return 0


def cmd_path(args) -> int:
    from .figures import save_path_figure

    data, inputs = _load_data(args)
    records = fit_path(
        data, args.alpha, args.q_v, args.q_g,
        VariableKind(args.variable_kind), GroupKind(args.group_kind),
        path_length=args.path_length, min_ratio=args.min_ratio,
        config=_solver_config(args),
    )
    out = _out_dir(args)
    summary = [
        {
            "lambda": lam,
            "iterations": sol.iterations,
            "converged": sol.converged,
            "n_selected_variables": sol.selected_variables.size,
            "n_selected_groups": sol.selected_groups.size,
            "objective": sol.objective,
            "intercept": sol.intercept,
        }
        for lam, sol in records
    ]
    write_json({"command": "path", "entries": summary}, out / "path.json")
    write_csv(summary, out / "path.csv")
    write_csv(
        [
            {"lambda": lam, "variable": j, "coefficient": float(sol.beta[j])}
            for lam, sol in records
            for j in range(data.n_variables)
        ],
        out / "path_coefficients.csv",
    )
    save_path_figure(records, out / "path.png")
    _write_manifest(args, out, inputs)
    print(f"path: {len(records)} fits from lambda={records[0][0]:.4g} "
          f"to {records[-1][0]:.4g}; wrote {out}")
    return 0


def cmd_cv(args) -> int:
    from .figures import save_cv_figure

    data, inputs = _load_data(args)
    result = cross_validate(
        data, args.alpha, args.q_v, args.q_g,
        VariableKind(args.variable_kind), GroupKind(args.group_kind),
        folds=args.folds, path_length=args.path_length,
        min_ratio=args.min_ratio, config=_solver_config(args),
        seed=args.seed, threads=args.threads,
    )
    out = _out_dir(args)
    write_json(
        {
            "command": "cv",
            "lambdas": result.lambdas,
            "mean_error": result.mean_error,
            "std_error": result.std_error,
            "lambda_min": result.lambda_min,
            "lambda_1se": result.lambda_1se,
            "lambda_min_index": result.lambda_min_index,
            "lambda_1se_index": result.lambda_1se_index,
            "failures": list(result.failures),
            "chosen": _solution_payload(result.chosen),
        },
        out / "cv.json",
    )
    write_csv(
        [
            {
                "lambda": float(result.lambdas[i]),
                "mean_error": float(result.mean_error[i]),
                "std_error": float(result.std_error[i]),
            }
            for i in range(result.lambdas.size)
        ],
        out / "cv_curve.csv",
    )
    write_csv(_coefficient_rows(result.chosen, data.partition),
              out / "chosen_coefficients.csv")
    save_cv_figure(result, out / "cv.png")
    _write_manifest(args, out, inputs)
    print(
        f"cv: lambda_1se={result.lambda_1se:.4g} "
        f"(min {result.lambda_min:.4g}); chosen model keeps "
        f"{result.chosen.selected_variables.size} variables; wrote {out}"
    )
    return 0


def cmd_noise_est(args) -> int:
    from .figures import save_noise_figure

    data, inputs = _load_data(args)
    config = _solver_config(args)
    if args.method == "adaptive":
        estimate, solution = adaptively_scaled_sgs(
            data, args.alpha, args.q_v, args.q_g, config,
            max_rounds=args.max_rounds,
        )
    else:
        estimate, solution = scaled_sgs(
            data, args.alpha, args.q_v, args.q_g,
            VariableKind(args.variable_kind), GroupKind(args.group_kind),
            config, max_rounds=args.max_rounds,
            lambda_base=args.lambda_base,
        )
    out = _out_dir(args)
    write_json(
        {
            "command": "noise-est",
            "method": args.method,
            "lambda_hat": estimate.lambda_hat,
            "rss": estimate.rss,
            "iterations": estimate.iterations,
            "converged": estimate.converged,
            "support": estimate.support,
            "solution": _solution_payload(solution),
        },
        out / "noise.json",
    )
    write_csv(_coefficient_rows(solution, data.partition),
              out / "coefficients.csv")
    save_noise_figure(estimate, solution, out / "noise.png")
    _write_manifest(args, out, inputs)
    print(
        f"noise-est[{args.method}]: lambda_hat={estimate.lambda_hat:.4g}, "
        f"support size {estimate.support.size}, "
        f"{'converged' if estimate.converged else 'NOT converged'} in "
        f"{estimate.iterations} rounds; wrote {out}"
    )
    return 0


def cmd_penalties(args) -> int:
    from .figures import save_penalty_figure

    if args.groups_spec is not None:
        partition = parse_groups_spec(args.groups_spec)
        inputs = {}
    elif args.groups is not None:
        g_path = _require_file("--groups", args.groups)
        partition = load_groups(g_path)
        inputs = {"groups": g_path}
    else:
        raise UsageError("--groups-spec (or --groups) is required")
    if args.p is not None and args.p != partition.n_variables:
        raise UsageError(
            f"--p: layout covers {partition.n_variables} variables, "
            f"not {args.p}"
        )
    q_v = args.q if args.q_v is None else args.q_v
    q_g = args.q if args.q_g is None else args.q_g
    # n_samples=1 makes the generation scale equal lam itself.
    spec = build_penalty_spec(
        partition, args.alpha, args.lam, q_v, q_g,
        VariableKind(args.kind), GroupKind(args.group_kind),
        n_samples=1,
    )
    out = _out_dir(args)
    rows = [
        {"level": "variable", "rank": i + 1, "weight": float(spec.v.values[i])}
        for i in range(len(spec.v))
    ] + [
        {"level": "group", "rank": i + 1, "weight": float(spec.w.values[i])}
        for i in range(len(spec.w))
    ]
    write_json(
        {
            "command": "penalties",
            "alpha": args.alpha,
            "lam": args.lam,
            "q_v": q_v,
            "q_g": q_g,
            "variable_kind": args.kind,
            "group_kind": args.group_kind,
            "group_sizes": partition.sizes,
            "v": spec.v.values,
            "w": spec.w.values,
        },
        out / "penalties.json",
    )
    write_csv(rows, out / "penalties.csv")
    save_penalty_figure(spec, out / "penalties.png")
    _write_manifest(args, out, inputs)
    print(
        f"penalties: {len(spec.v)} variable and {len(spec.w)} group "
        f"weights ({args.kind} + {args.group_kind}); wrote {out}"
    )
    return 0


def _parse_float_list(flag: str, text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from None
    if not values:
        raise UsageError(f"{flag}: empty list")
    return values


def _parse_models(flag: str, text: str) -> list[ModelSetup]:
    """Items like ``cv-1se@0.95`` or ``scaled@0.6``."""
    models = []
    for item in text.split(","):
        if "@" not in item:
            raise UsageError(f"{flag}: expected selector@alpha, got {item!r}")
        selector, _, alpha_text = item.partition("@")
        if selector not in ("cv-1se", "cv-min", "scaled", "adaptive"):
            raise UsageError(f"{flag}: unknown selector {selector!r}")
        try:
            alpha = float(alpha_text)
        except ValueError:
            raise UsageError(f"{flag}: bad alpha in {item!r}") from None
        models.append(ModelSetup(name=item, alpha=alpha, selector=selector))
    return models


def cmd_simulate(args) -> int:
    from .figures import save_fdr_figure, save_selection_figure

    scenario = preset_scenario(args.preset)
    out = _out_dir(args)
    if isinstance(scenario, OrthogonalScenario):
        grid = (
            [scenario.group_sparsity]
            if args.sparsity_grid is None
            else _parse_float_list("--sparsity-grid", args.sparsity_grid)
        )
        report = run_fdr_experiment(
            scenario,
            q_levels=_parse_float_list("--q-levels", args.q_levels),
            replicates=args.replicates,
            seed=args.seed,
            group_sparsity_grid=grid,
            variable_kind=VariableKind(args.variable_kind),
            group_kind=GroupKind(args.group_kind),
            threads=args.threads,
        )
        save_fdr_figure(report, out / "simulate.png")
    else:
        if args.sparsity_grid is not None:
            raise UsageError(
                "--sparsity-grid only applies to orthogonal presets"
            )
        report = run_selection_study(
            scenario,
            models=_parse_models("--models", args.models),
            replicates=args.replicates,
            seed=args.seed,
            threads=args.threads,
        )
        save_selection_figure(report, out / "simulate.png")
    write_json(
        {
            "command": "simulate",
            "preset": args.preset,
            "scenario": report.scenario,
            "aggregates": list(report.aggregates),
            "failures": list(report.failures),
        },
        out / "report.json",
    )
    write_csv(list(report.rows), out / "replicates.csv")
    write_csv(list(report.aggregates), out / "aggregates.csv")
    _write_manifest(args, out, {})
    print(
        f"simulate[{args.preset}]: {len(report.rows)} replicate rows, "
        f"{len(report.failures)} failures; wrote {out}"
    )
    return 0


def _add_data_flags(parser) -> None:
    parser.add_argument("--x", help="design matrix CSV")
    parser.add_argument("--y", help="response CSV (single column)")
    parser.add_argument("--groups",
                        help="group map CSV (variable_index,group_id)")
    parser.add_argument("--groups-spec",
                        help="compact layout, e.g. even5x200 or uneven3to7x20")
    parser.add_argument("--family", choices=["gaussian", "binomial"],
                        default="gaussian")


def _add_penalty_flags(parser) -> None:
    parser.add_argument("--alpha", type=float, default=0.95,
                        help="variable/group mixing weight in [0,1]")
    parser.add_argument("--q-v", type=float, default=0.1,
                        help="variable-level FDR target")
    parser.add_argument("--q-g", type=float, default=0.1,
                        help="group-level FDR target")
    parser.add_argument("--variable-kind", choices=_VKINDS, default="vmean")
    parser.add_argument("--group-kind", choices=_GKINDS,
                        default="gslope-mean")


def _add_solver_flags(parser) -> None:
    parser.add_argument("--tolerance", type=float, default=1e-4)
    parser.add_argument("--max-iterations", type=int, default=1000)
    parser.add_argument("--no-intercept", action="store_true")


def _add_common_flags(parser) -> None:
    parser.add_argument(
        "--out", default=os.environ.get("SGSLOPE_OUT", "."),
        help="output directory (default: $SGSLOPE_OUT or '.')",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=os.cpu_count(),
                        help="worker threads; results are identical for any "
                             "value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgslope",
        description="Bi-level sorted-penalty regression with FDR-calibrated "
                    "weight sequences.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")

    fit = sub.add_parser("fit", help="single fit at a fixed lambda")
    _add_data_flags(fit)
    _add_penalty_flags(fit)
    _add_solver_flags(fit)
    _add_common_flags(fit)
    fit.add_argument("--lam", type=float, required=True,
                     help="penalty scale")
    fit.set_defaults(func=cmd_fit)

    path = sub.add_parser("path", help="fits along a lambda path")
    _add_data_flags(path)
    _add_penalty_flags(path)
    _add_solver_flags(path)
    _add_common_flags(path)
    path.add_argument("--path-length", type=int, default=20)
    path.add_argument("--min-ratio", type=float, default=0.1)
    path.set_defaults(func=cmd_path)

    cv = sub.add_parser("cv", help="cross-validated lambda choice")
    _add_data_flags(cv)
    _add_penalty_flags(cv)
    _add_solver_flags(cv)
    _add_common_flags(cv)
    cv.add_argument("--folds", type=int, default=10)
    cv.add_argument("--path-length", type=int, default=20)
    cv.add_argument("--min-ratio", type=float, default=0.1)
    cv.set_defaults(func=cmd_cv)

    noise = sub.add_parser("noise-est",
                           help="noise-scaled fitting (scaled or adaptive)")
    _add_data_flags(noise)
    _add_penalty_flags(noise)
    _add_solver_flags(noise)
    _add_common_flags(noise)
    noise.add_argument("--method", choices=["scaled", "adaptive"],
                       required=True)
    noise.add_argument("--max-rounds", type=int, default=100)
    noise.add_argument("--lambda-base", type=float, default=None,
                       help="base scale for the scaled method (default 1/n)")
    noise.set_defaults(func=cmd_noise_est)

    pen = sub.add_parser("penalties",
                         help="emit the weight sequences for a layout")
    pen.add_argument("--p", type=int, default=None,
                     help="expected variable count (cross-check)")
    pen.add_argument("--groups", help="group map CSV")
    pen.add_argument("--groups-spec",
                     help="compact layout, e.g. even5x200 or uneven3to7x20")
    pen.add_argument("--alpha", type=float, default=0.5)
    pen.add_argument("--q", type=float, default=0.1,
                     help="FDR target for both levels")
    pen.add_argument("--q-v", type=float, default=None)
    pen.add_argument("--q-g", type=float, default=None)
    pen.add_argument("--kind", choices=_VKINDS, default="vmean",
                     help="variable sequence kind")
    pen.add_argument("--group-kind", choices=_GKINDS, default="gslope-mean")
    pen.add_argument("--lam", type=float, default=1.0,
                     help="scale the sequences are generated at")
    _add_common_flags(pen)
    pen.set_defaults(func=cmd_penalties)

    sim = sub.add_parser("simulate", help="seeded Monte-Carlo studies")
    sim.add_argument("--preset", choices=_PRESETS, required=True)
    sim.add_argument("--replicates", type=int, default=20)
    sim.add_argument("--q-levels", default="0.1",
                     help="comma list of FDR targets (orthogonal presets)")
    sim.add_argument("--sparsity-grid", default=None,
                     help="comma list of group-sparsity proportions "
                          "(orthogonal presets)")
    sim.add_argument("--variable-kind", choices=_VKINDS, default="vmax")
    sim.add_argument("--group-kind", choices=_GKINDS, default="gmax")
    sim.add_argument("--models", default="cv-1se@0.95",
                     help="comma list of selector@alpha items "
                          "(correlated presets)")
    _add_common_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SgsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
