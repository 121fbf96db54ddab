"""Evaluation protocol: MAE, Spearman rank correlation, activity-cliff
subsets, threshold sweeps, and nearest-train-distance stratification.

Undefined Spearman values (constant ranks) are reported as NaN markers and
serialized as null; they are never coerced to 0, so task averages stay
honest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .distance import DistanceMetric, nearest_neighbors
from .features import Featurizer
from .pairing import pairs_from_matrix
from .regressor import (
    KnnBaseline,
    MlpConfig,
    RegressorModel,
    knn_predict,
    predict_anchored,
    predict_standard,
    train_sqrl,
)

__all__ = [
    "EvalReport",
    "PerMoleculeRow",
    "SweepPoint",
    "SweepResult",
    "PredictionError",
    "DEFAULT_ALPHA_GRID",
    "mae",
    "spearman",
    "evaluate_task",
    "sweep_point",
    "threshold_sweep",
    "default_sweep_featurizer",
    "stratify_by_distance",
    "aggregate_reports",
    "report_to_dict",
    "save_report_json",
    "save_sweep_csv",
]


class PredictionError(RuntimeError):
    """A model failed to produce a prediction for a specific row."""


def mae(y_true, y_pred) -> float:
    """Mean absolute error."""
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if len(y_true) == 0 or len(y_true) != len(y_pred):
        raise ValueError("mae needs equal nonzero-length vectors")
    return float(np.mean(np.abs(y_true - y_pred)))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(y_true, y_pred) -> float:
    """Pearson correlation of average-tie fractional ranks.

    Returns NaN when either rank vector has zero variance.
    """
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if len(y_true) < 2 or len(y_true) != len(y_pred):
        raise ValueError("spearman needs equal-length vectors of size >= 2")
    r_true = _average_ranks(y_true)
    r_pred = _average_ranks(y_pred)
    ct = r_true - r_true.mean()
    cp = r_pred - r_pred.mean()
    denom = math.sqrt(float(ct @ ct) * float(cp @ cp))
    if denom == 0.0:
        return float("nan")
    return float(ct @ cp) / denom


@dataclass(frozen=True)
class PerMoleculeRow:
    id: str
    y_true: float
    y_pred: float
    dist_to_nearest_train: float
    is_cliff: bool = False


@dataclass(frozen=True, eq=False)
class EvalReport:
    task_id: str
    method: str  # standard | sqrl | knn
    mae: float
    spearman_rho: float  # NaN marks undefined
    n_test: int
    per_molecule: tuple[PerMoleculeRow, ...]
    cliff_mae: float | None = None
    cliff_spearman: float | None = None

    def __post_init__(self):
        assert self.mae >= 0.0
        assert math.isnan(self.spearman_rho) or -1.0 <= self.spearman_rho <= 1.0 + 1e-12
        assert len(self.per_molecule) == self.n_test


def _predict_row(predictor, record, train, metric, n):
    if isinstance(predictor, KnnBaseline):
        return knn_predict(predictor, record)
    if isinstance(predictor, RegressorModel):
        if predictor.mode == "standard":
            return predict_standard(predictor, record)
        return predict_anchored(predictor, record, train, metric, n=n)
    raise TypeError(f"unsupported predictor type {type(predictor)!r}")


def _method_name(predictor) -> str:
    if isinstance(predictor, KnnBaseline):
        return "knn"
    return predictor.mode


def evaluate_task(
    predictor,
    test,
    train,
    metric: DistanceMetric,
    n: int = 1,
    task_id: str = "task",
) -> EvalReport:
    """Score a predictor on a test split, with cliff-subset metrics.

    Each test row also records its distance to the nearest training molecule
    for later stratification. Cliff metrics appear only when at least two
    test rows carry the cliff flag. A failing prediction aborts the whole
    evaluation, naming the row.
    """
    if not len(test):
        raise ValueError("test set is empty")
    rows = []
    for record in test:
        try:
            pred = float(_predict_row(predictor, record, train, metric, n))
            nn_dist = float(nearest_neighbors(metric, record, train, 1)[0][1])
        except Exception as exc:
            raise PredictionError(
                f"prediction failed on row {record.id!r}: {exc}"
            ) from exc
        rows.append(
            PerMoleculeRow(
                id=record.id,
                y_true=record.y,
                y_pred=pred,
                dist_to_nearest_train=nn_dist,
                is_cliff=bool(record.is_cliff),
            )
        )

    y_true = [r.y_true for r in rows]
    y_pred = [r.y_pred for r in rows]
    cliff_rows = [r for r in rows if r.is_cliff]
    cliff_mae = cliff_spearman = None
    if len(cliff_rows) >= 2:
        cliff_mae = mae([r.y_true for r in cliff_rows], [r.y_pred for r in cliff_rows])
        cliff_spearman = spearman(
            [r.y_true for r in cliff_rows], [r.y_pred for r in cliff_rows]
        )
    return EvalReport(
        task_id=task_id,
        method=_method_name(predictor),
        mae=mae(y_true, y_pred),
        spearman_rho=spearman(y_true, y_pred) if len(rows) >= 2 else float("nan"),
        n_test=len(rows),
        per_molecule=tuple(rows),
        cliff_mae=cliff_mae,
        cliff_spearman=cliff_spearman,
    )


@dataclass(frozen=True)
class SweepPoint:
    alpha: float
    mae: float  # NaN when skipped
    spearman_rho: float  # NaN when skipped or undefined
    pair_count: int
    skipped: bool = False


@dataclass(frozen=True, eq=False)
class SweepResult:
    metric_kind: str
    grid: tuple[SweepPoint, ...]

    def __post_init__(self):
        alphas = [p.alpha for p in self.grid]
        assert alphas == sorted(alphas)
        counts = [p.pair_count for p in self.grid]
        assert counts == sorted(counts)


DEFAULT_ALPHA_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))


def default_sweep_featurizer(metric: DistanceMetric) -> Featurizer:
    return Featurizer(kind="morgan", fingerprint_config=metric.fingerprint_config)


def sweep_point(
    alpha: float,
    dmat: np.ndarray,
    features: np.ndarray,
    train,
    test,
    metric: DistanceMetric,
    cfg: MlpConfig,
    val_fraction: float = 0.1,
    n_anchors: int = 1,
    featurizer: Featurizer | None = None,
    task_id: str = "task",
) -> SweepPoint:
    """One grid point of a threshold sweep over a precomputed distance matrix."""
    ys = [r.y for r in train]
    pair_set = pairs_from_matrix(
        dmat, ys, alpha, metric_info=metric.describe(), warn_empty=False
    )
    if pair_set.empty:
        return SweepPoint(
            alpha=alpha,
            mae=float("nan"),
            spearman_rho=float("nan"),
            pair_count=0,
            skipped=True,
        )
    model = train_sqrl(
        pair_set, features, cfg, val_fraction=val_fraction, featurizer=featurizer
    )
    report = evaluate_task(model, test, train, metric, n=n_anchors, task_id=task_id)
    return SweepPoint(
        alpha=alpha,
        mae=report.mae,
        spearman_rho=report.spearman_rho,
        pair_count=len(pair_set.pairs),
    )


def threshold_sweep(
    train,
    test,
    metric: DistanceMetric,
    alpha_grid,
    cfg: MlpConfig,
    *,
    val_fraction: float = 0.1,
    n_anchors: int = 1,
    featurizer: Featurizer | None = None,
    task_id: str = "task",
) -> SweepResult:
    """Train and score one relative model per threshold in ``alpha_grid``.

    Training distances are computed once and re-thresholded per grid point;
    every grid point trains from the same seeded initialization. Grid points
    with an empty pair set are marked skipped rather than failing the sweep.
    """
    alpha_grid = [float(a) for a in alpha_grid]
    if not alpha_grid or alpha_grid != sorted(alpha_grid):
        raise ValueError("alpha_grid must be non-empty and ascending")
    if featurizer is None:
        featurizer = default_sweep_featurizer(metric)

    features = featurizer.matrix(train)
    dmat = metric.matrix(train)

    points = [
        sweep_point(
            alpha,
            dmat,
            features,
            train,
            test,
            metric,
            cfg,
            val_fraction=val_fraction,
            n_anchors=n_anchors,
            featurizer=featurizer,
            task_id=task_id,
        )
        for alpha in alpha_grid
    ]
    return SweepResult(metric_kind=metric.kind, grid=tuple(points))


def stratify_by_distance(report: EvalReport, bin_edges) -> list[dict]:
    """Per-bin metrics over test rows bucketed by nearest-train distance.

    Bins are [e_k, e_{k+1}) with the last bin closed on the right. Spearman
    is omitted (None) for bins with fewer than 3 rows; empty bins carry no
    metrics at all.
    """
    edges = [float(e) for e in bin_edges]
    if len(edges) < 2 or edges != sorted(edges):
        raise ValueError("bin_edges must be ascending with at least two entries")
    out = []
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        last = k == len(edges) - 2
        rows = [
            r
            for r in report.per_molecule
            if lo <= r.dist_to_nearest_train < hi
            or (last and r.dist_to_nearest_train == hi)
        ]
        entry = {"lo": lo, "hi": hi, "n": len(rows), "mae": None, "spearman": None}
        if rows:
            entry["mae"] = mae([r.y_true for r in rows], [r.y_pred for r in rows])
            if len(rows) >= 3:
                entry["spearman"] = spearman(
                    [r.y_true for r in rows], [r.y_pred for r in rows]
                )
        out.append(entry)
    return out


def aggregate_reports(reports) -> dict:
    """Across-task mean and sample standard deviation of MAE and Spearman."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to aggregate")
    maes = np.array([r.mae for r in reports], dtype=np.float64)
    rhos = np.array([r.spearman_rho for r in reports], dtype=np.float64)

    def _std(v):
        return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0

    return {
        "n_tasks": len(reports),
        "mae_mean": float(maes.mean()),
        "mae_std": _std(maes),
        "spearman_mean": float(rhos.mean()),
        "spearman_std": _std(rhos),
        "std_convention": "sample",
    }


def _nan_to_none(value):
    if value is None:
        return None
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def report_to_dict(report: EvalReport) -> dict:
    return {
        "task_id": report.task_id,
        "method": report.method,
        "mae": report.mae,
        "spearman_rho": _nan_to_none(report.spearman_rho),
        "n_test": report.n_test,
        "cliff_mae": _nan_to_none(report.cliff_mae),
        "cliff_spearman": _nan_to_none(report.cliff_spearman),
        "per_molecule": [
            {
                "id": r.id,
                "y_true": r.y_true,
                "y_pred": r.y_pred,
                "dist_to_nearest_train": r.dist_to_nearest_train,
                "is_cliff": r.is_cliff,
            }
            for r in report.per_molecule
        ],
    }


def save_report_json(report: EvalReport, path, extra: dict | None = None) -> None:
    payload = report_to_dict(report)
    if extra:
        payload["run"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_sweep_csv(result: SweepResult, path) -> None:
    """Sweep export: ``alpha,pair_count,mae,spearman`` with blanks for skips."""
    lines = [f"# metric_kind: {result.metric_kind}", "alpha,pair_count,mae,spearman"]
    for p in result.grid:
        mae_cell = "" if math.isnan(p.mae) else repr(p.mae)
        rho_cell = "" if math.isnan(p.spearman_rho) else repr(p.spearman_rho)
        lines.append(f"{p.alpha!r},{p.pair_count},{mae_cell},{rho_cell}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
