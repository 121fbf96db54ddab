import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemgen import random_molecule_smiles
from oracles import spearman_concordance_oracle
from sqrl.data import MoleculeRecord
from sqrl.distance import DistanceMetric
from sqrl.evaluation import (
    EvalReport,
    PredictionError,
    aggregate_reports,
    evaluate_task,
    mae,
    save_report_json,
    save_sweep_csv,
    spearman,
    stratify_by_distance,
    threshold_sweep,
)
from sqrl.features import Featurizer
from sqrl.fingerprint import FingerprintConfig
from sqrl.molgraph import parse_smiles
from sqrl.regressor import KnnBaseline, MlpConfig, RegressorModel


def rec(rid, smiles, y, split="train", is_cliff=None):
    return MoleculeRecord(
        id=rid, smiles=smiles, mol=parse_smiles(smiles), y=y, split=split,
        is_cliff=is_cliff,
    )


def distinct_records(n, seed=0, y_fn=None):
    rng = np.random.default_rng(seed)
    out = []
    seen = set()
    while len(out) < n:
        smiles = random_molecule_smiles(rng, max_heavy=9)
        if smiles in seen:
            continue
        seen.add(smiles)
        y = float(rng.normal()) if y_fn is None else y_fn(len(out))
        out.append(rec(f"m{len(out)}", smiles, y))
    return out


def constant_model(dim, value):
    weights = [(np.zeros((dim, 2)), np.zeros(2)), (np.zeros((2, 1)), np.array([value]))]
    return RegressorModel(
        weights=weights,
        config=MlpConfig(hidden_sizes=(2,)),
        mode="standard",
        input_dim=dim,
        featurizer=Featurizer(
            kind="morgan", fingerprint_config=FingerprintConfig(width=dim)
        ),
    )


# -- mae -------------------------------------------------------------------------


def test_mae_examples():
    assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mae([0.0, 0.0], [1.0, -1.0]) == 1.0
    assert mae([1.0, 2.0, 4.0], [1.5, 1.5, 5.0]) == pytest.approx(2.0 / 3.0)


def test_mae_validates_lengths():
    with pytest.raises(ValueError):
        mae([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        mae([], [])


def test_mae_translation_of_errors():
    rng = np.random.default_rng(0)
    y = rng.normal(size=20)
    pred = y + rng.normal(size=20) * 0.3
    shift = 0.7
    assert mae(y, pred + shift) == pytest.approx(
        float(np.mean(np.abs((pred - y) + shift)))
    )


# -- spearman ---------------------------------------------------------------------


def test_spearman_examples():
    assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)


def test_spearman_undefined_marker():
    assert math.isnan(spearman([1, 2, 3], [5, 5, 5]))


def test_spearman_matches_concordance_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(3, 40))
        x = rng.permutation(n).astype(float)
        y = rng.permutation(n).astype(float)
        assert spearman(x, y) == pytest.approx(
            spearman_concordance_oracle(x, y), abs=1e-12
        )


def test_spearman_handles_ties_with_average_ranks():
    # ranks x: (1.5, 1.5, 3); ranks y: (1, 2, 3); Pearson of those ranks.
    got = spearman([5.0, 5.0, 9.0], [1.0, 2.0, 3.0])
    rx = np.array([1.5, 1.5, 3.0])
    ry = np.array([1.0, 2.0, 3.0])
    want = float(np.corrcoef(rx, ry)[0, 1])
    assert got == pytest.approx(want)


@given(
    st.lists(
        st.floats(-100, 100, allow_nan=False).map(lambda v: round(v, 3)),
        min_size=3,
        max_size=25,
        unique=True,
    ),
    st.lists(
        st.floats(-100, 100, allow_nan=False).map(lambda v: round(v, 3)),
        min_size=25,
        max_size=25,
        unique=True,
    ),
    st.sampled_from(
        [lambda v: v, lambda v: v**3 + v, lambda v: math.exp(v / 100.0), lambda v: 2 * v + 1]
    ),
)
@settings(max_examples=100, deadline=None)
def test_spearman_invariant_under_monotone_transforms(x, y_pool, transform):
    y = y_pool[: len(x)]
    base = spearman(x, y)
    mapped = spearman([transform(v) for v in x], y)
    assert mapped == pytest.approx(base, abs=1e-9)


# -- evaluate_task -----------------------------------------------------------------


def test_perfect_predictor_scores_perfectly():
    records = distinct_records(10, seed=3)
    metric = DistanceMetric("tanimoto_binary", fingerprint_config=FingerprintConfig(width=256))
    baseline = KnnBaseline(metric=metric, records=tuple(records), k=1)
    report = evaluate_task(baseline, records, records, metric, task_id="t")
    assert report.mae == 0.0
    assert report.spearman_rho == pytest.approx(1.0)
    assert report.method == "knn"
    assert report.n_test == 10
    assert report.cliff_mae is None  # no cliff rows at all


def test_constant_predictor_undefined_spearman():
    records = distinct_records(8, seed=4)
    metric = DistanceMetric("tanimoto_binary", fingerprint_config=FingerprintConfig(width=128))
    model = constant_model(128, 1.5)
    report = evaluate_task(model, records, records, metric)
    assert math.isnan(report.spearman_rho)
    want = float(np.mean([abs(r.y - 1.5) for r in records]))
    assert report.mae == pytest.approx(want)


def test_cliff_subset_metrics_present_when_flagged():
    records = distinct_records(10, seed=5)
    flagged = [
        MoleculeRecord(
            id=r.id, smiles=r.smiles, mol=r.mol, y=r.y, split=r.split,
            is_cliff=(k < 4),
        )
        for k, r in enumerate(records)
    ]
    metric = DistanceMetric("tanimoto_binary", fingerprint_config=FingerprintConfig(width=128))
    baseline = KnnBaseline(metric=metric, records=tuple(flagged), k=1)
    report = evaluate_task(baseline, flagged, flagged, metric)
    assert report.cliff_mae == 0.0
    assert report.cliff_spearman == pytest.approx(1.0)


def test_zero_weight_sqrl_model_self_anchoring_gives_zero_mae():
    records = distinct_records(12, seed=6)
    width = 128
    featurizer = Featurizer(kind="morgan", fingerprint_config=FingerprintConfig(width=width))
    weights = [(np.zeros((width, 4)), np.zeros(4)), (np.zeros((4, 1)), np.zeros(1))]
    model = RegressorModel(
        weights=weights, config=MlpConfig(hidden_sizes=(4,)), mode="sqrl",
        input_dim=width, featurizer=featurizer,
    )
    metric = DistanceMetric(
        "tanimoto_binary", fingerprint_config=FingerprintConfig(width=width)
    )
    report = evaluate_task(model, records, records, metric, n=1)
    assert report.mae == 0.0


def test_prediction_failure_names_row():
    records = distinct_records(3, seed=7)
    metric = DistanceMetric("tanimoto_binary", fingerprint_config=FingerprintConfig(width=64))
    model = constant_model(32, 0.0)
    # Bind a featurizer whose width disagrees with the weight matrix.
    model.featurizer = Featurizer(
        kind="morgan", fingerprint_config=FingerprintConfig(width=64)
    )
    with pytest.raises(PredictionError, match="m0"):
        evaluate_task(model, records, records, metric)


def test_empty_test_set_rejected():
    records = distinct_records(3, seed=8)
    metric = DistanceMetric("tanimoto_binary")
    baseline = KnnBaseline(metric=metric, records=tuple(records), k=1)
    with pytest.raises(ValueError):
        evaluate_task(baseline, [], records, metric)


# -- stratification -----------------------------------------------------------------


def _toy_report():
    rows = [
        ("a", 1.0, 1.5, 0.1),
        ("b", 2.0, 1.0, 0.2),
        ("c", 3.0, 3.5, 0.6),
        ("d", 4.0, 4.0, 0.9),
        ("e", 5.0, 4.0, 0.95),
    ]
    from sqrl.evaluation import PerMoleculeRow

    per = tuple(PerMoleculeRow(i, t, p, d) for i, t, p, d in rows)
    return EvalReport(
        task_id="t", method="knn",
        mae=mae([r.y_true for r in per], [r.y_pred for r in per]),
        spearman_rho=spearman([r.y_true for r in per], [r.y_pred for r in per]),
        n_test=5, per_molecule=per,
    )


def test_single_bin_reproduces_overall_metrics():
    report = _toy_report()
    rows = stratify_by_distance(report, [0.0, 1.0])
    assert len(rows) == 1
    assert rows[0]["n"] == 5
    assert rows[0]["mae"] == pytest.approx(report.mae)
    assert rows[0]["spearman"] == pytest.approx(report.spearman_rho)


def test_empty_bin_has_no_metrics():
    report = _toy_report()
    rows = stratify_by_distance(report, [0.0, 0.3, 0.4, 1.0])
    assert rows[1] == {"lo": 0.3, "hi": 0.4, "n": 0, "mae": None, "spearman": None}


def test_two_bin_hand_partition():
    report = _toy_report()
    rows = stratify_by_distance(report, [0.0, 0.5, 1.0])
    assert rows[0]["n"] == 2 and rows[1]["n"] == 3
    assert rows[0]["mae"] == pytest.approx(np.mean([0.5, 1.0]))
    assert rows[1]["mae"] == pytest.approx(np.mean([0.5, 0.0, 1.0]))
    assert rows[0]["spearman"] is None  # fewer than 3 rows
    assert rows[1]["spearman"] is not None


# -- aggregation ----------------------------------------------------------------------


def test_aggregate_matches_recomputation():
    reports = []
    for k, (m, rho) in enumerate([(0.5, 0.8), (0.7, 0.6), (0.6, 0.9)]):
        from sqrl.evaluation import PerMoleculeRow

        per = (PerMoleculeRow("x", 0.0, m, 0.1), PerMoleculeRow("y", 1.0, 1.0 - m, 0.2))
        reports.append(
            EvalReport(task_id=f"t{k}", method="knn", mae=m, spearman_rho=rho,
                       n_test=2, per_molecule=per)
        )
    agg = aggregate_reports(reports)
    assert agg["mae_mean"] == pytest.approx(np.mean([0.5, 0.7, 0.6]))
    assert agg["mae_std"] == pytest.approx(np.std([0.5, 0.7, 0.6], ddof=1))
    assert agg["spearman_mean"] == pytest.approx(np.mean([0.8, 0.6, 0.9]))
    assert agg["std_convention"] == "sample"


# -- sweep -----------------------------------------------------------------------------


def test_threshold_sweep_monotone_pairs_and_skips(tmp_path):
    rng = np.random.default_rng(9)
    train = distinct_records(12, seed=10)
    test = distinct_records(4, seed=11)
    metric = DistanceMetric(
        "tanimoto_binary", fingerprint_config=FingerprintConfig(width=128)
    )
    cfg = MlpConfig(hidden_sizes=(8,), learning_rate=1e-3, batch_size=16,
                    max_epochs=3, patience=3, seed=0)
    grid = [0.001, 0.5, 0.8, 1.0]
    result = threshold_sweep(train, test, metric, grid, cfg, val_fraction=0.0)
    counts = [p.pair_count for p in result.grid]
    assert counts == sorted(counts)
    assert result.grid[0].skipped  # nothing within 0.001
    assert math.isnan(result.grid[0].mae)
    assert result.grid[-1].pair_count == 12 * 11
    assert not result.grid[-1].skipped

    csv_path = tmp_path / "sweep.csv"
    save_sweep_csv(result, csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[1] == "alpha,pair_count,mae,spearman"
    assert lines[2].startswith("0.001,0,,")


def test_sweep_rejects_bad_grid():
    metric = DistanceMetric("tanimoto_binary")
    cfg = MlpConfig(hidden_sizes=(4,))
    with pytest.raises(ValueError):
        threshold_sweep([], [], metric, [], cfg)
    with pytest.raises(ValueError):
        threshold_sweep([], [], metric, [0.5, 0.1], cfg)


# -- report json -------------------------------------------------------------------------


def test_report_json_serializes_nan_as_null(tmp_path):
    records = distinct_records(4, seed=12)
    metric = DistanceMetric("tanimoto_binary", fingerprint_config=FingerprintConfig(width=64))
    model = constant_model(64, 2.0)
    report = evaluate_task(model, records, records, metric)
    path = tmp_path / "report.json"
    save_report_json(report, path, extra={"seed": 7})
    payload = json.loads(path.read_text())
    assert payload["spearman_rho"] is None
    assert payload["run"]["seed"] == 7
    assert len(payload["per_molecule"]) == 4
