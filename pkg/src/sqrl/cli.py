"""Command-line front end: ingest, featurize, pair, train, predict,
evaluate, sweep, and synthesize, with reproducible artifacts.

Configuration is a flat ``key = value`` text file; any key can be
overridden by the matching command-line flag. Every command writes its
delimited/JSON artifacts plus a run-metadata JSON (config, seed, dataset
hash, wall time) into the output directory, using write-then-rename so
partial files never appear. Exit codes: 0 success, 2 configuration error,
3 data error, 4 compute failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .data import (
    DatasetManifest,
    IngestError,
    MoleculeRecord,
    ingest,
    synthesize_dataset,
    write_dataset_csv,
)
from .distance import (
    METRIC_KINDS,
    DistanceMetric,
    EmbeddingTable,
    MissingEmbeddingError,
    pairwise_stats,
)
from .evaluation import (
    DEFAULT_ALPHA_GRID,
    PredictionError,
    SweepResult,
    default_sweep_featurizer,
    evaluate_task,
    report_to_dict,
    save_sweep_csv,
    stratify_by_distance,
    sweep_point,
    threshold_sweep,
)
from .features import Featurizer
from .fingerprint import FingerprintConfig, SubstructureLibrary
from .molgraph import SmilesError
from .pairing import (
    DegenerateDistancesError,
    build_relative_dataset,
    save_pairs_csv,
    suggest_threshold,
)
from .regressor import (
    KnnBaseline,
    MlpConfig,
    TrainingDivergedError,
    load_model,
    predict_anchored,
    predict_standard,
    save_model,
    sqrl_mlp_config,
    standard_mlp_config,
    train_sqrl,
    train_standard,
)

log = logging.getLogger("sqrl")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_COMPUTE = 4


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _parse_opt_int(text: str):
    lowered = str(text).strip().lower()
    return None if lowered in ("", "none") else int(lowered)


# key -> (parser, default, help). None defaults fall back to per-method
# hyperparameters at build time.
CONFIG_KEYS = {
    "metric": (str, "tanimoto_binary", f"distance kind, one of {METRIC_KINDS}"),
    "fp_radius": (int, 2, "fingerprint radius"),
    "fp_width": (int, 2048, "folded fingerprint width"),
    "fp_counted": (_parse_bool, True, "count fingerprints (false = binary)"),
    "fp_chirality": (_parse_bool, True, "include chirality tags in fingerprints"),
    "alpha": (float, 0.7, "pairing distance threshold"),
    "threshold_fraction": (float, 0.9, "suggest_threshold fraction of mean"),
    "alpha_grid": (_parse_floats, DEFAULT_ALPHA_GRID, "sweep thresholds"),
    "hidden_sizes": (_parse_ints, None, "MLP hidden sizes (method default)"),
    "dropout": (float, None, "dropout (method default)"),
    "learning_rate": (float, None, "learning rate (method default)"),
    "batch_size": (int, None, "batch size (method default)"),
    "max_epochs": (int, 500, "max training epochs"),
    "patience": (int, 30, "early-stopping patience (epochs)"),
    "val_fraction": (float, 0.1, "validation fraction"),
    "max_pairs_per_epoch": (_parse_opt_int, None, "per-epoch pair subsample cap"),
    "standardize": (_parse_bool, False, "standardize features on train split"),
    "pair_mode": (str, "diff", "pair input: diff or diff_concat"),
    "n_anchors": (int, 1, "anchors for relative inference"),
    "knn_k": (int, 1, "neighbors for the KNN baseline"),
    "seed": (int, 0, "global seed, recorded in artifacts"),
    "output_dir": (str, "sqrl_out", "artifact directory"),
    "embedding_file": (str, None, "embedding table CSV (id,<dim> header)"),
    "normalize_embeddings": (_parse_bool, False, "scale by max train distance"),
    "substructure_file": (str, None, "substructure library TSV (default: built-in)"),
    "substructure_budget_s": (float, 10.0, "per-query match budget, seconds"),
    "mcs_budget_s": (float, 1.0, "per-pair MCS budget, seconds"),
    "max_stat_pairs": (int, 200_000, "pair sample cap for distance statistics"),
    "figures": (_parse_bool, True, "render PNG figures next to outputs"),
    "workers": (int, 1, "parallel workers for sweep grid points"),
    "log10_transform": (_parse_bool, False, "apply y := -log10(y) at ingest"),
    "n_molecules": (int, 500, "synthetic benchmark size"),
    "methods": (str, "standard,sqrl", "evaluate: comma list of methods"),
    "strat_edges": (_parse_floats, (0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
                    "stratification bin edges"),
}


def load_config(path: str | None) -> dict:
    cfg = {key: default for key, (_, default, _) in CONFIG_KEYS.items()}
    if path is None:
        return cfg
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            parser = CONFIG_KEYS[key][0]
            try:
                cfg[key] = parser(value.strip())
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return cfg


def _apply_overrides(cfg: dict, args: argparse.Namespace) -> dict:
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            parser = CONFIG_KEYS[key][0]
            try:
                cfg[key] = parser(value) if isinstance(value, str) else value
            except ValueError as exc:
                raise ConfigError(f"--{key.replace('_', '-')}: {exc}") from exc
    if cfg["metric"] not in METRIC_KINDS:
        raise ConfigError(f"metric must be one of {METRIC_KINDS}")
    if cfg["alpha"] <= 0:
        raise ConfigError("alpha must be positive")
    return cfg


def _config_digest(cfg: dict) -> str:
    canonical = json.dumps(
        {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.items())}
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


# -- artifact plumbing ----------------------------------------------------------


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_write_json(path: str, payload) -> None:
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


class _Run:
    """Collects run metadata and writes it on close."""

    def __init__(self, command: str, cfg: dict, out_dir: str):
        self.command = command
        self.cfg = cfg
        self.out_dir = out_dir
        self.started = time.time()
        self.extra: dict = {}
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def finish(self) -> None:
        payload = {
            "command": self.command,
            "version": __version__,
            "seed": self.cfg["seed"],
            "config": {
                k: list(v) if isinstance(v, tuple) else v
                for k, v in sorted(self.cfg.items())
            },
            "config_digest": _config_digest(self.cfg),
            "wall_time_s": round(time.time() - self.started, 3),
            **self.extra,
        }
        _atomic_write_json(self.path(f"{self.command}_meta.json"), payload)


def _provenance(cfg: dict, manifest: DatasetManifest | None) -> dict:
    info = {"seed": cfg["seed"], "config_digest": _config_digest(cfg)}
    if manifest is not None:
        info["dataset_hash"] = manifest.content_hash
    return info


# -- component builders ------------------------------------------------------------


def _fingerprint_config(cfg: dict) -> FingerprintConfig:
    return FingerprintConfig(
        radius=cfg["fp_radius"],
        width=cfg["fp_width"],
        counted=cfg["fp_counted"],
        use_chirality=cfg["fp_chirality"],
    )


def _build_metric(cfg: dict) -> DistanceMetric:
    kind = cfg["metric"]
    kwargs: dict = {}
    if kind in ("tanimoto_binary", "tanimoto_count"):
        kwargs["fingerprint_config"] = _fingerprint_config(cfg)
    elif kind == "substructure_jaccard":
        if cfg["substructure_file"]:
            kwargs["library"] = SubstructureLibrary.from_file(cfg["substructure_file"])
        kwargs["substructure_budget_s"] = cfg["substructure_budget_s"]
    elif kind == "mcs":
        kwargs["mcs_budget_s"] = cfg["mcs_budget_s"]
    elif kind == "embedding_euclidean":
        if not cfg["embedding_file"]:
            raise ConfigError("embedding_euclidean needs embedding_file")
        kwargs["table"] = EmbeddingTable.from_file(cfg["embedding_file"])
        kwargs["normalize_embeddings"] = cfg["normalize_embeddings"]
    return DistanceMetric(kind, **kwargs)


def _build_featurizer(cfg: dict, metric: DistanceMetric) -> Featurizer:
    if metric.kind == "embedding_euclidean":
        return Featurizer(
            kind="embedding", table=metric.table, table_path=cfg["embedding_file"]
        )
    return Featurizer(kind="morgan", fingerprint_config=_fingerprint_config(cfg))


def _mlp_config(method: str, cfg: dict) -> MlpConfig:
    base = standard_mlp_config(cfg["seed"]) if method == "standard" else sqrl_mlp_config(cfg["seed"])
    return MlpConfig(
        hidden_sizes=cfg["hidden_sizes"] or base.hidden_sizes,
        dropout=base.dropout if cfg["dropout"] is None else cfg["dropout"],
        learning_rate=(
            base.learning_rate if cfg["learning_rate"] is None else cfg["learning_rate"]
        ),
        batch_size=base.batch_size if cfg["batch_size"] is None else cfg["batch_size"],
        max_epochs=cfg["max_epochs"],
        patience=cfg["patience"],
        seed=cfg["seed"],
        standardize=cfg["standardize"],
        pair_mode=cfg["pair_mode"],
        max_pairs_per_epoch=cfg["max_pairs_per_epoch"],
    )


def _load_dataset(path: str, cfg: dict) -> DatasetManifest:
    manifest = ingest(path)
    if manifest.rejected:
        log.warning(
            "%d of %d rows rejected during ingestion",
            len(manifest.rejected),
            len(manifest.rejected) + len(manifest.rows),
        )
    if cfg["log10_transform"]:
        rows = []
        rejected = list(manifest.rejected)
        for r in manifest.rows:
            if r.y <= 0:
                rejected.append((-1, f"id {r.id}: -log10 needs positive y"))
                continue
            rows.append(
                MoleculeRecord(
                    id=r.id, smiles=r.smiles, mol=r.mol, y=-math.log10(r.y),
                    split=r.split, is_cliff=r.is_cliff,
                )
            )
        if not rows:
            raise IngestError("log10 transform rejected every row")
        manifest = DatasetManifest(
            rows=tuple(rows),
            source_path=manifest.source_path,
            content_hash=manifest.content_hash,
            rejected=tuple(rejected),
        )
    return manifest


def _float_cell(value: float) -> str:
    return "" if value is None or (isinstance(value, float) and math.isnan(value)) else repr(value)


# -- commands --------------------------------------------------------------------------


def cmd_synthesize(cfg: dict, args) -> int:
    run = _Run("synthesize", cfg, cfg["output_dir"])
    manifest = synthesize_dataset(cfg["n_molecules"], seed=cfg["seed"])
    out = run.path("dataset.csv")
    write_dataset_csv(manifest.rows, out)
    run.extra["dataset_hash"] = manifest.content_hash
    run.extra["rows"] = len(manifest.rows)
    run.finish()
    n_cliff = sum(1 for r in manifest.rows if r.is_cliff)
    print(
        f"synthesized {len(manifest.rows)} molecules "
        f"({len(manifest.train)} train / {len(manifest.test)} test, "
        f"{n_cliff} cliff-flagged) -> {out}"
    )
    return EXIT_OK


def cmd_featurize(cfg: dict, args) -> int:
    run = _Run("featurize", cfg, cfg["output_dir"])
    manifest = _load_dataset(args.dataset, cfg)
    metric = _build_metric(cfg)
    featurizer = _build_featurizer(cfg, metric)
    matrix = featurizer.matrix(manifest.rows)
    header = "id," + ",".join(f"f{k:04d}" for k in range(matrix.shape[1]))
    lines = [header]
    for record, row in zip(manifest.rows, matrix):
        cells = (
            [str(int(v)) for v in row]
            if featurizer.kind == "morgan"
            else [repr(float(v)) for v in row]
        )
        lines.append(record.id + "," + ",".join(cells))
    out = run.path("features.csv")
    _atomic_write_text(out, "\n".join(lines) + "\n")
    run.extra.update(
        dataset_hash=manifest.content_hash,
        rows=len(manifest.rows),
        rejected=len(manifest.rejected),
        dimension=int(matrix.shape[1]),
    )
    run.finish()
    print(f"featurized {len(manifest.rows)} molecules at d={matrix.shape[1]} -> {out}")
    return EXIT_OK


def cmd_pairs(cfg: dict, args) -> int:
    run = _Run("pairs", cfg, cfg["output_dir"])
    manifest = _load_dataset(args.dataset, cfg)
    train = manifest.train
    if len(train) < 2:
        raise IngestError("pairing needs at least 2 training rows")
    metric = _build_metric(cfg)
    metric.fit_normalizer(train)

    stats = pairwise_stats(
        metric, train, max_pairs=cfg["max_stat_pairs"], seed=cfg["seed"]
    )
    try:
        suggested = suggest_threshold(stats, cfg["threshold_fraction"])
    except DegenerateDistancesError:
        suggested = None

    pair_set = build_relative_dataset(train, metric, cfg["alpha"])
    pairs_path = run.path("pairs.csv")
    save_pairs_csv(pair_set, pairs_path, dataset_hash=manifest.content_hash)

    edges, counts = stats.histogram
    stats_payload = {
        "metric": metric.describe(),
        "n_pairs_sampled": stats.n_pairs,
        "mean": stats.mean,
        "std": stats.std,
        "skewness": None if math.isnan(stats.skewness) else stats.skewness,
        "excess_kurtosis": (
            None if math.isnan(stats.excess_kurtosis) else stats.excess_kurtosis
        ),
        "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
        "suggested_alpha": suggested,
        "threshold_fraction": cfg["threshold_fraction"],
        "alpha": cfg["alpha"],
        "ordered_pair_count": len(pair_set.pairs),
        **_provenance(cfg, manifest),
    }
    _atomic_write_json(run.path("distance_stats.json"), stats_payload)

    if cfg["figures"]:
        from .figures import render_distance_histogram

        render_distance_histogram(
            stats, run.path("distance_hist.png"), suggested_alpha=suggested
        )

    run.extra.update(dataset_hash=manifest.content_hash, pairs=len(pair_set.pairs))
    run.finish()
    suggestion = "n/a (degenerate)" if suggested is None else f"{suggested:.4f}"
    print(
        f"{len(pair_set.pairs)} ordered pairs at alpha={cfg['alpha']} "
        f"(mean distance {stats.mean:.4f}, suggested alpha {suggestion}) -> {pairs_path}"
    )
    if pair_set.empty:
        print("warning: pair set is empty; training cannot proceed at this alpha")
    return EXIT_OK


def _fit_method(method: str, cfg: dict, manifest: DatasetManifest, metric, featurizer):
    train = manifest.train
    if method == "knn":
        return KnnBaseline(metric=metric, records=tuple(train), k=cfg["knn_k"])
    mlp_cfg = _mlp_config(method, cfg)
    features = featurizer.matrix(train)
    if method == "standard":
        return train_standard(
            features,
            [r.y for r in train],
            mlp_cfg,
            val_fraction=cfg["val_fraction"],
            featurizer=featurizer,
        )
    if method == "sqrl":
        pair_set = build_relative_dataset(train, metric, cfg["alpha"])
        if pair_set.empty:
            raise TrainingDivergedError(
                f"no training pairs within alpha={cfg['alpha']}"
            )
        return train_sqrl(
            pair_set,
            features,
            mlp_cfg,
            val_fraction=cfg["val_fraction"],
            featurizer=featurizer,
        )
    raise ConfigError(f"unknown method {method!r}")


def cmd_train(cfg: dict, args) -> int:
    run = _Run("train", cfg, cfg["output_dir"])
    manifest = _load_dataset(args.dataset, cfg)
    if not manifest.train:
        raise IngestError("no training rows in dataset")
    metric = _build_metric(cfg)
    metric.fit_normalizer(manifest.train)
    featurizer = _build_featurizer(cfg, metric)
    method = args.method
    if method == "knn":
        raise ConfigError("knn has no checkpoint; use `evaluate --methods knn`")
    model = _fit_method(method, cfg, manifest, metric, featurizer)
    out = run.path(f"model_{method}.bin")
    tmp = out + ".tmp"
    save_model(model, tmp)
    os.replace(tmp, out)
    run.extra.update(
        dataset_hash=manifest.content_hash,
        method=method,
        epochs=len(model.training_log),
        final_train_loss=model.training_log[-1]["train_loss"],
        final_val_loss=model.training_log[-1]["val_loss"],
    )
    run.finish()
    print(
        f"trained {method} for {len(model.training_log)} epochs "
        f"(train loss {model.training_log[-1]['train_loss']:.6f}) -> {out}"
    )
    return EXIT_OK


def cmd_predict(cfg: dict, args) -> int:
    run = _Run("predict", cfg, cfg["output_dir"])
    manifest = _load_dataset(args.dataset, cfg)
    table = None
    if cfg["embedding_file"]:
        table = EmbeddingTable.from_file(cfg["embedding_file"])
    model = load_model(args.model, embedding_table=table)
    metric = _build_metric(cfg)
    metric.fit_normalizer(manifest.train)

    rows = {
        "test": manifest.test,
        "train": manifest.train,
        "all": manifest.rows,
    }[args.rows]
    if not rows:
        raise IngestError(f"no {args.rows!r} rows to predict")

    lines = ["id,y_pred"]
    for record in rows:
        try:
            if model.mode == "standard":
                pred = predict_standard(model, record)
            else:
                if not manifest.train:
                    raise IngestError("anchored prediction needs train rows")
                pred = predict_anchored(
                    model, record, manifest.train, metric, n=cfg["n_anchors"]
                )
        except (ValueError, MissingEmbeddingError) as exc:
            raise PredictionError(f"row {record.id!r}: {exc}") from exc
        lines.append(f"{record.id},{pred!r}")
    out = run.path("predictions.csv")
    _atomic_write_text(out, "\n".join(lines) + "\n")
    run.extra.update(dataset_hash=manifest.content_hash, rows=len(rows), mode=model.mode)
    run.finish()
    print(f"wrote {len(rows)} predictions ({model.mode}) -> {out}")
    return EXIT_OK


def cmd_evaluate(cfg: dict, args) -> int:
    run = _Run("evaluate", cfg, cfg["output_dir"])
    manifest = _load_dataset(args.dataset, cfg)
    manifest.require_split()
    metric = _build_metric(cfg)
    metric.fit_normalizer(manifest.train)
    featurizer = _build_featurizer(cfg, metric)

    methods = [m.strip() for m in cfg["methods"].split(",") if m.strip()]
    if not methods:
        raise ConfigError("no methods requested")
    unknown = set(methods) - {"standard", "sqrl", "knn"}
    if unknown:
        raise ConfigError(f"unknown methods: {sorted(unknown)}")

    provenance = _provenance(cfg, manifest)
    print(f"{'method':<10} {'mae':>8} {'spearman':>9} {'cliff_mae':>10} {'cliff_rho':>10}")
    for method in methods:
        predictor = _fit_method(method, cfg, manifest, metric, featurizer)
        report = evaluate_task(
            predictor,
            manifest.test,
            manifest.train,
            metric,
            n=cfg["n_anchors"],
            task_id=os.path.basename(args.dataset),
        )
        payload = report_to_dict(report)
        payload["run"] = {**provenance, "alpha": cfg["alpha"], "n_anchors": cfg["n_anchors"]}
        _atomic_write_json(run.path(f"report_{method}.json"), payload)

        strata = stratify_by_distance(report, cfg["strat_edges"])
        strat_lines = ["lo,hi,n,mae,spearman"]
        for row in strata:
            strat_lines.append(
                f"{row['lo']!r},{row['hi']!r},{row['n']},"
                f"{_float_cell(row['mae'])},{_float_cell(row['spearman'])}"
            )
        _atomic_write_text(
            run.path(f"stratified_{method}.csv"), "\n".join(strat_lines) + "\n"
        )

        if cfg["figures"]:
            from .figures import render_prediction_scatter, render_stratification

            render_prediction_scatter(report, run.path(f"scatter_{method}.png"))
            render_stratification(
                strata,
                run.path(f"stratified_{method}.png"),
                title=f"{method}: metrics vs. distance to train",
            )

        def fmt(v):
            return "n/a" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4f}"

        print(
            f"{method:<10} {fmt(report.mae):>8} {fmt(report.spearman_rho):>9} "
            f"{fmt(report.cliff_mae):>10} {fmt(report.cliff_spearman):>10}"
        )

    run.extra.update(dataset_hash=manifest.content_hash, methods=methods)
    run.finish()
    return EXIT_OK


def _sweep_task(payload):
    (alpha, dmat, features, train, test, metric, mlp_cfg, val_fraction,
     n_anchors, featurizer) = payload
    return sweep_point(
        alpha, dmat, features, train, test, metric, mlp_cfg,
        val_fraction=val_fraction, n_anchors=n_anchors, featurizer=featurizer,
    )


def cmd_sweep(cfg: dict, args) -> int:
    run = _Run("sweep", cfg, cfg["output_dir"])
    manifest = _load_dataset(args.dataset, cfg)
    manifest.require_split()
    metric = _build_metric(cfg)
    metric.fit_normalizer(manifest.train)
    featurizer = _build_featurizer(cfg, metric)
    mlp_cfg = _mlp_config("sqrl", cfg)
    grid = sorted(cfg["alpha_grid"])
    if not grid:
        raise ConfigError("alpha_grid is empty")

    train, test = manifest.train, manifest.test
    if cfg["workers"] > 1:
        features = featurizer.matrix(train)
        dmat = metric.matrix(train)
        payloads = [
            (alpha, dmat, features, train, test, metric, mlp_cfg,
             cfg["val_fraction"], cfg["n_anchors"], featurizer)
            for alpha in grid
        ]
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            points = list(pool.map(_sweep_task, payloads))
        result = SweepResult(metric_kind=metric.kind, grid=tuple(points))
    else:
        result = threshold_sweep(
            train, test, metric, grid, mlp_cfg,
            val_fraction=cfg["val_fraction"],
            n_anchors=cfg["n_anchors"],
            featurizer=featurizer,
        )

    out = run.path("sweep.csv")
    tmp = out + ".tmp"
    save_sweep_csv(result, tmp)
    os.replace(tmp, out)
    if cfg["figures"]:
        from .figures import render_sweep

        render_sweep(result, run.path("sweep.png"))

    kept = [p for p in result.grid if not p.skipped]
    best = min(kept, key=lambda p: p.mae) if kept else None
    run.extra.update(
        dataset_hash=manifest.content_hash,
        grid=list(grid),
        best_alpha=None if best is None else best.alpha,
    )
    run.finish()
    for p in result.grid:
        status = "skipped" if p.skipped else f"mae {p.mae:.4f}"
        print(f"alpha {p.alpha:.2f}: {p.pair_count:>8} pairs, {status}")
    if best is not None:
        print(f"best alpha by MAE: {best.alpha} (mae {best.mae:.4f}) -> {out}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, dataset: bool = True) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    if dataset:
        parser.add_argument("--dataset", required=True, help="dataset CSV path")
    for key, (_, _, help_text) in CONFIG_KEYS.items():
        parser.add_argument(
            f"--{key.replace('_', '-')}", dest=key, default=None, help=help_text
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqrl",
        description=(
            "Similarity-quantized relative learning: threshold-paired "
            "difference regression for molecular activity prediction."
        ),
    )
    parser.add_argument("--version", action="version", version=f"sqrl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", help="generate the synthetic benchmark CSV")
    _add_common(p, dataset=False)
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("featurize", help="write the feature matrix CSV")
    _add_common(p)
    p.set_defaults(fn=cmd_featurize)

    p = sub.add_parser("pairs", help="build the thresholded pair set + stats")
    _add_common(p)
    p.set_defaults(fn=cmd_pairs)

    p = sub.add_parser("train", help="train one model and save a checkpoint")
    _add_common(p)
    p.add_argument("--method", choices=("standard", "sqrl"), required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="predict with a saved checkpoint")
    _add_common(p)
    p.add_argument("--model", required=True, help="model checkpoint path")
    p.add_argument("--rows", choices=("test", "train", "all"), default="test")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("evaluate", help="train+score methods on the test split")
    _add_common(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep", help="threshold sweep over an alpha grid")
    _add_common(p)
    p.set_defaults(fn=cmd_sweep)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return args.fn(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestError, SmilesError, MissingEmbeddingError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, PredictionError) as exc:
        print(f"compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
