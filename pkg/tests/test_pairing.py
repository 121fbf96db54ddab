import math

import numpy as np
import pytest

from chemgen import random_molecule_smiles
from sqrl.data import MoleculeRecord
from sqrl.distance import DistanceMetric, stats_from_values
from sqrl.molgraph import parse_smiles
from sqrl.pairing import (
    DegenerateDistancesError,
    build_relative_dataset,
    pair_budget,
    pairs_from_matrix,
    save_pairs_csv,
    suggest_threshold,
)


def rec(rid, smiles, y):
    return MoleculeRecord(id=rid, smiles=smiles, mol=parse_smiles(smiles), y=y)


def random_records(n, seed=0):
    rng = np.random.default_rng(seed)
    return [
        rec(f"m{k}", random_molecule_smiles(rng, max_heavy=9), float(rng.normal()))
        for k in range(n)
    ]


def test_complete_graph_gives_all_ordered_pairs():
    records = [rec("a", "CCO", 1.0), rec("b", "CCN", 2.0), rec("c", "CCC", 3.0)]
    metric = DistanceMetric("tanimoto_binary")
    pairs = build_relative_dataset(records, metric, alpha=1.0)
    assert len(pairs.pairs) == 6
    assert pairs.source_size == 3


def test_empty_pair_set_is_flagged_not_fatal():
    records = [rec("a", "CCCCCC", 0.0), rec("b", "c1ccncc1", 1.0)]
    metric = DistanceMetric("tanimoto_binary")
    with pytest.warns(RuntimeWarning, match="no molecule pairs"):
        pairs = build_relative_dataset(records, metric, alpha=1e-6)
    assert pairs.empty


def test_delta_y_is_label_difference():
    records = [rec("a", "CCO", 1.0), rec("b", "OCC", 3.5)]
    metric = DistanceMetric("tanimoto_binary")
    pairs = build_relative_dataset(records, metric, alpha=1.0)
    by_key = {(p.i, p.j): p for p in pairs.pairs}
    assert by_key[(0, 1)].delta_y == -2.5
    assert by_key[(1, 0)].delta_y == 2.5


def test_antisymmetry_exact_to_the_bit():
    records = random_records(15, seed=1)
    metric = DistanceMetric("tanimoto_count")
    pairs = build_relative_dataset(records, metric, alpha=0.95)
    by_key = {(p.i, p.j): p for p in pairs.pairs}
    assert by_key  # sanity: something was paired
    for (i, j), p in by_key.items():
        mirror = by_key[(j, i)]
        assert mirror.delta_y == -p.delta_y
        assert mirror.dist == p.dist
        assert p.i != p.j


def test_alpha_monotonicity():
    records = random_records(20, seed=2)
    metric = DistanceMetric("tanimoto_binary")
    previous: set[tuple[int, int]] = set()
    for alpha in (0.2, 0.4, 0.6, 0.8, 1.0):
        pairs = {
            (p.i, p.j)
            for p in pairs_from_matrix(
                metric.matrix(records),
                [r.y for r in records],
                alpha,
                warn_empty=False,
            ).pairs
        }
        assert previous <= pairs
        previous = pairs


def test_alpha_covering_everything_gives_n_times_n_minus_one():
    records = random_records(12, seed=3)
    metric = DistanceMetric("tanimoto_binary")
    pairs = build_relative_dataset(records, metric, alpha=1.0)
    assert len(pairs.pairs) == 12 * 11


def test_pairs_ordered_canonically():
    records = random_records(10, seed=4)
    metric = DistanceMetric("tanimoto_binary")
    pairs = build_relative_dataset(records, metric, alpha=1.0)
    keys = [(p.i, p.j) for p in pairs.pairs]
    assert keys == sorted(keys)


def test_alpha_must_be_positive():
    records = random_records(3, seed=5)
    metric = DistanceMetric("tanimoto_binary")
    with pytest.raises(ValueError):
        build_relative_dataset(records, metric, alpha=0.0)


# -- threshold suggestion ------------------------------------------------------


def _stats(mean, spread=0.1):
    # Non-degenerate synthetic stats with a controllable mean.
    values = np.array([mean - spread, mean, mean + spread])
    return stats_from_values(values)


def test_suggest_threshold_fraction_of_mean():
    assert suggest_threshold(_stats(0.8), fraction=0.875) == pytest.approx(0.7)
    assert suggest_threshold(_stats(0.5), fraction=1.0) == pytest.approx(0.5)


def test_suggest_threshold_default_sits_below_mean():
    stats = _stats(0.6)
    assert suggest_threshold(stats) == pytest.approx(0.54)


def test_suggest_threshold_degenerate_errors():
    with pytest.raises(DegenerateDistancesError):
        suggest_threshold(stats_from_values(np.zeros(4)))
    with pytest.raises(DegenerateDistancesError):
        suggest_threshold(stats_from_values(np.full(4, 0.5)))
    with pytest.raises(ValueError):
        suggest_threshold(_stats(0.5), fraction=0.0)


# -- pair budget ----------------------------------------------------------------


def test_pair_budget_extremes():
    stats = stats_from_values(np.array([0.2, 0.3, 0.4, 0.5]))
    assert pair_budget(10, 1.0, stats) == 10 * 9
    assert pair_budget(10, 0.01, stats) == 0.0


def test_pair_budget_uniform_histogram():
    from sqrl.distance import DistStats

    edges = np.linspace(0.0, 1.0, 51)
    counts = np.full(50, 20)
    stats = DistStats(
        mean=0.5,
        std=0.28,
        skewness=0.0,
        excess_kurtosis=-1.2,
        histogram=(edges, counts),
        n_pairs=1000,
    )
    assert pair_budget(100, 0.25, stats) == pytest.approx(9900 * 0.25)


# -- export ----------------------------------------------------------------------


def test_save_pairs_csv_header_records_metric_and_alpha(tmp_path):
    records = [rec("a", "CCO", 1.0), rec("b", "OCC", 2.0)]
    metric = DistanceMetric("tanimoto_binary")
    pairs = build_relative_dataset(records, metric, alpha=0.7)
    path = tmp_path / "pairs.csv"
    save_pairs_csv(pairs, path, dataset_hash="abc123")
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    comments = [l for l in lines if l.startswith("#")]
    assert any("alpha: 0.7" in l for l in comments)
    assert any("tanimoto_binary" in l for l in comments)
    assert any("abc123" in l for l in comments)
    assert "i,j,dist,delta_y" in lines
    data_rows = [l for l in lines if l and not l.startswith("#")][1:]
    assert len(data_rows) == len(pairs.pairs)
