"""Static matplotlib renderings saved next to the tabular outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE = {"dpi": 120, "metadata": {"Software": "sgslope"}}


def save_coefficient_figure(solution, partition, path) -> None:
    """Stem-style coefficient plot, colored by group membership."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    idx = np.arange(solution.beta.size)
    colors = partition.group_of % 10
    ax.vlines(idx, 0.0, solution.beta, color="0.8", linewidth=0.8)
    ax.scatter(idx, solution.beta, c=colors, cmap="tab10", s=12)
    ax.axhline(0.0, color="0.3", linewidth=0.8)
    ax.set_xlabel("variable")
    ax.set_ylabel("coefficient")
    ax.set_title(f"{solution.selected_variables.size} variables in "
                 f"{solution.selected_groups.size} groups selected")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_path_figure(path_records, path) -> None:
    """Coefficient traces against lambda (log axis, decreasing)."""
    lambdas = np.array([lam for lam, _ in path_records])
    coefs = np.column_stack([sol.beta for _, sol in path_records])
    fig, ax = plt.subplots(figsize=(7, 4))
    for row in coefs:
        ax.plot(lambdas, row, linewidth=0.9)
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("lambda")
    ax.set_ylabel("coefficient")
    ax.set_title("regularization path")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_cv_figure(result, path) -> None:
    """Cross-validation curve with the min and 1se choices marked."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.errorbar(result.lambdas, result.mean_error, yerr=result.std_error,
                fmt="o-", markersize=3, linewidth=1, capsize=2)
    ax.axvline(result.lambda_min, color="tab:red", linewidth=0.9,
               label="min")
    ax.axvline(result.lambda_1se, color="tab:green", linewidth=0.9,
               label="1se")
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("lambda")
    ax.set_ylabel("validation error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_penalty_figure(spec, path) -> None:
    """Variable and group weight sequences side by side."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3.5))
    left.step(np.arange(1, len(spec.v) + 1), spec.v.values, where="mid")
    left.set_xlabel("variable rank")
    left.set_ylabel("weight")
    left.set_title("variable sequence")
    right.step(np.arange(1, len(spec.w) + 1), spec.w.values, where="mid",
               color="tab:orange")
    right.set_xlabel("group rank")
    right.set_ylabel("weight")
    right.set_title("group sequence")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_fdr_figure(report, path) -> None:
    """Mean variable/group FDR against the sparsity grid, per q level,
    with the nominal bounds drawn as dashed lines."""
    aggregates = list(report.aggregates)
    qs = sorted({a["q"] for a in aggregates})
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4), sharex=True)
    for q in qs:
        cell = sorted(
            (a for a in aggregates if a["q"] == q),
            key=lambda a: a["group_sparsity"],
        )
        xs = [a["group_sparsity"] for a in cell]
        for ax, kind in ((left, "v"), (right, "g")):
            means = [a[f"mean_{kind}fdr"] for a in cell]
            errs = [2 * a[f"se_{kind}fdr"] for a in cell]
            bounds = [a[f"{kind}fdr_bound"] for a in cell]
            ax.errorbar(xs, means, yerr=errs, fmt="o-", markersize=3,
                        linewidth=1, capsize=2, label=f"q={q}")
            ax.plot(xs, bounds, "--", linewidth=0.9, color="0.4")
    left.set_title("variable FDR")
    right.set_title("group FDR")
    for ax in (left, right):
        ax.set_xlabel("group sparsity")
        ax.set_ylabel("mean FDR")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_selection_figure(report, path) -> None:
    """Per-model bars of variable FDR and sensitivity."""
    aggregates = list(report.aggregates)
    names = [a["model"] for a in aggregates]
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.35
    ax.bar(x - width / 2, [a["mean_vfdr"] for a in aggregates], width,
           yerr=[2 * a["se_vfdr"] for a in aggregates], capsize=3,
           label="variable FDR")
    ax.bar(x + width / 2, [a["mean_vsensitivity"] for a in aggregates],
           width, yerr=[2 * a["se_vsensitivity"] for a in aggregates],
           capsize=3, label="variable sensitivity")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def save_noise_figure(estimate, solution, path) -> None:
    """Coefficient magnitudes with the selected support highlighted."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    idx = np.arange(solution.beta.size)
    ax.vlines(idx, 0.0, np.abs(solution.beta), color="0.8", linewidth=0.8)
    if estimate.support.size:
        ax.scatter(estimate.support, np.abs(solution.beta[estimate.support]),
                   color="tab:red", s=14, label="selected")
        ax.legend()
    ax.set_xlabel("variable")
    ax.set_ylabel("|coefficient|")
    ax.set_title(f"lambda_hat={estimate.lambda_hat:.3g}, "
                 f"{'converged' if estimate.converged else 'not converged'} "
                 f"in {estimate.iterations} rounds")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
