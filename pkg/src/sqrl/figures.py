"""Matplotlib renderings of the report artifacts.

Every renderer takes already-computed data and writes one PNG next to the
delimited output it illustrates. Rendering is headless (Agg) and optional:
the CSV/JSON artifacts are the source of truth.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .distance import DistStats
from .evaluation import EvalReport, SweepResult

__all__ = [
    "render_distance_histogram",
    "render_sweep",
    "render_stratification",
    "render_prediction_scatter",
]


def render_distance_histogram(
    stats: DistStats, path, suggested_alpha: float | None = None
) -> None:
    """Pairwise distance distribution with mean and suggested threshold."""
    edges, counts = stats.histogram
    centers = (edges[:-1] + edges[1:]) / 2.0
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(centers, counts, width=np.diff(edges), color="#4878a8", edgecolor="none")
    ax.axvline(stats.mean, color="#333333", linestyle="--", label=f"mean = {stats.mean:.3f}")
    if suggested_alpha is not None:
        ax.axvline(
            suggested_alpha,
            color="#c44e52",
            linestyle=":",
            label=f"suggested alpha = {suggested_alpha:.3f}",
        )
    skew = "n/a" if math.isnan(stats.skewness) else f"{stats.skewness:.2f}"
    kurt = "n/a" if math.isnan(stats.excess_kurtosis) else f"{stats.excess_kurtosis:.2f}"
    ax.set_xlabel("pairwise distance")
    ax.set_ylabel(f"pairs (n = {stats.n_pairs})")
    ax.set_title(f"Distance distribution (skew {skew}, excess kurtosis {kurt})")
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep(result: SweepResult, path) -> None:
    """MAE and Spearman against the distance threshold, with pair counts."""
    kept = [p for p in result.grid if not p.skipped]
    fig, (ax_mae, ax_rho) = plt.subplots(1, 2, figsize=(9, 4), sharex=True)
    if kept:
        alphas = [p.alpha for p in kept]
        ax_mae.plot(alphas, [p.mae for p in kept], "o-", color="#c44e52")
        rho_pts = [(p.alpha, p.spearman_rho) for p in kept if not math.isnan(p.spearman_rho)]
        if rho_pts:
            ax_rho.plot(*zip(*rho_pts), "o-", color="#4878a8")
        ax_counts = ax_mae.twinx()
        ax_counts.bar(
            [p.alpha for p in result.grid],
            [p.pair_count for p in result.grid],
            width=0.04,
            color="#cccccc",
            alpha=0.5,
            zorder=0,
        )
        ax_counts.set_ylabel("pair count", color="#888888")
    for p in result.grid:
        if p.skipped:
            ax_mae.axvline(p.alpha, color="#dddddd", linestyle=":")
    ax_mae.set_xlabel("alpha")
    ax_mae.set_ylabel("MAE")
    ax_rho.set_xlabel("alpha")
    ax_rho.set_ylabel("Spearman rho")
    fig.suptitle(f"Threshold sweep ({result.metric_kind})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_stratification(strata: list[dict], path, title: str = "") -> None:
    """Per-bin metrics as a function of nearest-train distance."""
    fig, ax = plt.subplots(figsize=(6, 4))
    centers = [(row["lo"] + row["hi"]) / 2.0 for row in strata]
    widths = [row["hi"] - row["lo"] for row in strata]
    rho = [row["spearman"] for row in strata]
    mae_vals = [row["mae"] for row in strata]
    ax.bar(
        centers,
        [row["n"] for row in strata],
        width=widths,
        color="#eeeeee",
        edgecolor="#cccccc",
    )
    ax.set_ylabel("test molecules", color="#888888")
    ax.set_xlabel("distance to nearest training molecule")
    ax2 = ax.twinx()
    pts = [(c, r) for c, r in zip(centers, rho) if r is not None]
    if pts:
        ax2.plot(*zip(*pts), "o-", color="#4878a8", label="Spearman rho")
    pts_mae = [(c, m) for c, m in zip(centers, mae_vals) if m is not None]
    if pts_mae:
        ax2.plot(*zip(*pts_mae), "s--", color="#c44e52", label="MAE")
    ax2.set_ylabel("metric value")
    ax2.legend(loc="best", frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_prediction_scatter(report: EvalReport, path) -> None:
    """Predicted vs. true activity, cliff molecules highlighted."""
    fig, ax = plt.subplots(figsize=(5, 5))
    plain = [r for r in report.per_molecule if not r.is_cliff]
    cliff = [r for r in report.per_molecule if r.is_cliff]
    if plain:
        ax.scatter(
            [r.y_true for r in plain],
            [r.y_pred for r in plain],
            s=18,
            color="#4878a8",
            alpha=0.7,
            label="test",
        )
    if cliff:
        ax.scatter(
            [r.y_true for r in cliff],
            [r.y_pred for r in cliff],
            s=26,
            color="#c44e52",
            marker="^",
            label="cliff",
        )
    lo = min(r.y_true for r in report.per_molecule)
    hi = max(r.y_true for r in report.per_molecule)
    ax.plot([lo, hi], [lo, hi], color="#999999", linewidth=1)
    rho = "n/a" if math.isnan(report.spearman_rho) else f"{report.spearman_rho:.3f}"
    ax.set_title(f"{report.method}: MAE {report.mae:.3f}, rho {rho}")
    ax.set_xlabel("true activity")
    ax.set_ylabel("predicted activity")
    ax.legend(loc="best", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
