"""Construction of the relative pair dataset under a distance threshold.

Ordered pairs are stored in both directions, so the antisymmetry of the
label differences is baked into training data. Pairs are built within the
training split only; inference anchors come from the full training set
regardless of whether a molecule contributed pairs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .distance import DistanceMetric, DistStats

__all__ = [
    "PairRecord",
    "RelativePairSet",
    "DegenerateDistancesError",
    "build_relative_dataset",
    "pairs_from_matrix",
    "suggest_threshold",
    "pair_budget",
    "save_pairs_csv",
]


class DegenerateDistancesError(ValueError):
    """Distance distribution gives no usable threshold suggestion."""


@dataclass(frozen=True)
class PairRecord:
    i: int
    j: int
    delta_y: float  # y_i - y_j
    dist: float


@dataclass(frozen=True, eq=False)
class RelativePairSet:
    """All ordered pairs (i, j), i != j, with distance <= alpha."""

    pairs: tuple[PairRecord, ...]
    alpha: float
    metric: dict
    source_size: int

    @property
    def empty(self) -> bool:
        return not self.pairs

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(i, j, delta_y) columns for vectorized training."""
        if self.empty:
            return (
                np.zeros(0, dtype=np.int64),
                np.zeros(0, dtype=np.int64),
                np.zeros(0, dtype=np.float64),
            )
        i = np.array([p.i for p in self.pairs], dtype=np.int64)
        j = np.array([p.j for p in self.pairs], dtype=np.int64)
        dy = np.array([p.delta_y for p in self.pairs], dtype=np.float64)
        return i, j, dy


def pairs_from_matrix(
    dmat: np.ndarray,
    ys,
    alpha: float,
    metric_info: dict | None = None,
    warn_empty: bool = True,
) -> RelativePairSet:
    """Threshold a precomputed distance matrix into a pair set.

    Shared by :func:`build_relative_dataset` and the sweep harness so the
    O(N^2) distances are computed once per dataset.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n = dmat.shape[0]
    ys = np.asarray(ys, dtype=np.float64)
    pairs = []
    for i in range(n):
        row = dmat[i]
        for j in range(n):
            if i != j and row[j] <= alpha:
                pairs.append(
                    PairRecord(
                        i=i,
                        j=j,
                        delta_y=float(ys[i] - ys[j]),
                        dist=float(row[j]),
                    )
                )
    pair_set = RelativePairSet(
        pairs=tuple(pairs),
        alpha=float(alpha),
        metric=dict(metric_info or {}),
        source_size=n,
    )
    if pair_set.empty and warn_empty:
        warnings.warn(
            f"no molecule pairs within alpha={alpha}; training cannot proceed",
            RuntimeWarning,
            stacklevel=3,
        )
    return pair_set


def build_relative_dataset(
    dataset, metric: DistanceMetric, alpha: float
) -> RelativePairSet:
    """All ordered pairs of ``dataset`` records within ``alpha``.

    Records need ``id``, ``mol`` and ``y`` attributes. Output ordering is
    canonical (ascending (i, j)) no matter how distances were computed.
    An empty result is legal but flagged with a warning.
    """
    if len(dataset) < 2:
        raise ValueError("need at least 2 records to build pairs")
    dmat = metric.matrix(dataset)
    ys = [r.y for r in dataset]
    return pairs_from_matrix(dmat, ys, alpha, metric_info=metric.describe())


def suggest_threshold(stats: DistStats, fraction: float = 0.9) -> float:
    """A threshold below the mean pairwise distance: ``fraction * mean``.

    Raises :class:`DegenerateDistancesError` when the distribution carries
    no signal (non-finite or zero mean, or all distances equal); pick alpha
    manually in that case.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    if not math.isfinite(stats.mean) or stats.mean <= 0 or stats.degenerate:
        raise DegenerateDistancesError(
            "distance distribution is degenerate; choose alpha manually"
        )
    return fraction * stats.mean


def pair_budget(dataset_size: int, alpha: float, stats: DistStats) -> float:
    """Expected ordered-pair count at ``alpha`` from the distance histogram.

    Histogram mass at or below ``alpha`` (linearly interpolated inside the
    straddling bin) times N(N-1).
    """
    if dataset_size < 0:
        raise ValueError("dataset_size must be nonnegative")
    edges, counts = stats.histogram
    total = counts.sum()
    if total == 0:
        return 0.0
    mass = 0.0
    for k in range(len(counts)):
        lo, hi = edges[k], edges[k + 1]
        if alpha >= hi:
            mass += counts[k]
        elif alpha > lo:
            mass += counts[k] * (alpha - lo) / (hi - lo)
    fraction = mass / total
    return dataset_size * (dataset_size - 1) * fraction


def save_pairs_csv(
    pair_set: RelativePairSet, path, dataset_hash: str = ""
) -> None:
    """Write ``i,j,dist,delta_y`` rows under '#' metadata comment lines."""
    lines = [
        f"# metric: {pair_set.metric}",
        f"# alpha: {pair_set.alpha!r}",
        f"# dataset_hash: {dataset_hash}",
        f"# source_size: {pair_set.source_size}",
        "i,j,dist,delta_y",
    ]
    for p in pair_set.pairs:
        lines.append(f"{p.i},{p.j},{p.dist!r},{p.delta_y!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
