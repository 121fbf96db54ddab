import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemgen import random_molecule_smiles
from oracles import mcs_oracle_size
from sqrl.data import MoleculeRecord
from sqrl.distance import (
    DistanceMetric,
    EmbeddingTable,
    MissingEmbeddingError,
    distance,
    distance_matrix,
    generalized_jaccard,
    nearest_neighbors,
    pairwise_stats,
    stats_from_values,
    tanimoto_binary,
    tanimoto_count,
)
from sqrl.fingerprint import FingerprintConfig, SubstructureLibrary
from sqrl.molgraph import parse_smiles


def rec(rid: str, smiles: str, y: float = 0.0) -> MoleculeRecord:
    return MoleculeRecord(id=rid, smiles=smiles, mol=parse_smiles(smiles), y=y)


def some_records(n: int, seed: int = 0, max_heavy: int = 10) -> list[MoleculeRecord]:
    rng = np.random.default_rng(seed)
    return [
        rec(f"m{k}", random_molecule_smiles(rng, max_heavy=max_heavy))
        for k in range(n)
    ]


# -- vector-level metrics ---------------------------------------------------


def test_generalized_jaccard_hand_example():
    assert generalized_jaccard(np.array([2, 1, 0]), np.array([1, 1, 1])) == 0.5
    assert tanimoto_count is generalized_jaccard


def test_empty_vectors_are_at_distance_zero():
    zero = np.zeros(8)
    assert tanimoto_binary(zero, zero) == 0.0
    assert tanimoto_count(zero, zero) == 0.0


@given(
    st.lists(st.integers(0, 5), min_size=6, max_size=6),
    st.lists(st.integers(0, 5), min_size=6, max_size=6),
    st.lists(st.integers(0, 5), min_size=6, max_size=6),
)
@settings(max_examples=200, deadline=None)
def test_count_tanimoto_metric_axioms(a, b, c):
    u, v, w = np.array(a), np.array(b), np.array(c)
    for fn in (tanimoto_binary, tanimoto_count):
        d_uv = fn(u, v)
        assert 0.0 <= d_uv <= 1.0
        assert d_uv == fn(v, u)
        assert fn(u, u) == 0.0
        assert d_uv <= fn(u, w) + fn(w, v) + 1e-12


# -- metric objects over molecule records ------------------------------------


@pytest.mark.parametrize("kind", ["tanimoto_binary", "tanimoto_count", "substructure_jaccard"])
def test_identical_molecules_zero_distance(kind):
    metric = DistanceMetric(kind)
    a = rec("a", "CC(=O)Oc1ccccc1C(=O)O")
    b = rec("b", "CC(=O)Oc1ccccc1C(=O)O")
    assert distance(metric, a, b) == 0.0


def test_mcs_distance_hand_example():
    # Exhaustive search on CC vs CCO gives a 2-atom common subgraph:
    # 1 - 2*2/(2+3) = 0.2.
    metric = DistanceMetric("mcs")
    a, b = rec("a", "CC"), rec("b", "CCO")
    assert mcs_oracle_size(a.mol, b.mol) == 2
    assert distance(metric, a, b) == pytest.approx(0.2)
    assert distance(metric, b, a) == pytest.approx(0.2)


def test_mcs_distance_matches_oracle_formula_on_random_pairs():
    metric = DistanceMetric("mcs", mcs_budget_s=30.0)
    rng = np.random.default_rng(5)
    for k in range(15):
        a = rec(f"a{k}", random_molecule_smiles(rng, max_heavy=7))
        b = rec(f"b{k}", random_molecule_smiles(rng, max_heavy=7))
        n_mcs = mcs_oracle_size(a.mol, b.mol)
        from sqrl.molgraph import heavy_atom_count

        want = 1.0 - 2.0 * n_mcs / (heavy_atom_count(a.mol) + heavy_atom_count(b.mol))
        assert distance(metric, a, b) == pytest.approx(want)


@pytest.mark.parametrize(
    "kind", ["tanimoto_binary", "tanimoto_count", "substructure_jaccard", "mcs"]
)
def test_symmetry_and_range(kind):
    metric = DistanceMetric(kind)
    records = some_records(8, seed=3)
    for i in range(len(records)):
        for j in range(i + 1, len(records)):
            d_ij = distance(metric, records[i], records[j])
            d_ji = distance(metric, records[j], records[i])
            assert d_ij == pytest.approx(d_ji)
            assert 0.0 <= d_ij <= 1.0


def test_distance_matrix_agrees_with_scalar_calls():
    for kind in ("tanimoto_binary", "tanimoto_count"):
        metric = DistanceMetric(kind)
        records = some_records(12, seed=11)
        mat = distance_matrix(metric, records)
        assert np.allclose(mat, mat.T)
        assert np.all(np.diag(mat) == 0)
        for i in (0, 3, 7):
            for j in (1, 5, 11):
                assert mat[i, j] == pytest.approx(
                    distance(metric, records[i], records[j])
                )


def test_substructure_metric_uses_library():
    lib = SubstructureLibrary.from_pairs([("o", "O"), ("cc", "CC")])
    metric = DistanceMetric("substructure_jaccard", library=lib)
    a = rec("a", "CCO")  # counts (1, 1)
    b = rec("b", "CCC")  # counts (0, 2)
    assert distance(metric, a, b) == pytest.approx(1.0 - 1.0 / 3.0)


def test_binary_vs_count_fingerprint_metrics_differ():
    metric_b = DistanceMetric("tanimoto_binary", fingerprint_config=FingerprintConfig(width=64))
    metric_c = DistanceMetric("tanimoto_count", fingerprint_config=FingerprintConfig(width=64))
    a = rec("a", "CCCCCCCC")
    b = rec("b", "CCCCCCCN")
    assert distance(metric_b, a, b) != distance(metric_c, a, b)


# -- embeddings ---------------------------------------------------------------


def make_table(tmp_path, rows, dim):
    path = tmp_path / "emb.csv"
    lines = [f"id,{dim}"]
    for key, vec in rows:
        lines.append(",".join([key] + [repr(float(x)) for x in vec]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EmbeddingTable.from_file(path)


def test_embedding_table_load_and_distance(tmp_path):
    table = make_table(tmp_path, [("a", [0, 0]), ("b", [3, 4])], dim=2)
    metric = DistanceMetric("embedding_euclidean", table=table)
    assert distance(metric, rec("a", "C"), rec("b", "C")) == pytest.approx(5.0)


def test_embedding_missing_row(tmp_path):
    table = make_table(tmp_path, [("a", [0.0])], dim=1)
    metric = DistanceMetric("embedding_euclidean", table=table)
    with pytest.raises(MissingEmbeddingError):
        distance(metric, rec("a", "C"), rec("zzz", "C"))


def test_embedding_normalization(tmp_path):
    table = make_table(tmp_path, [("a", [0.0]), ("b", [2.0]), ("c", [10.0])], dim=1)
    metric = DistanceMetric(
        "embedding_euclidean", table=table, normalize_embeddings=True
    )
    records = [rec("a", "C"), rec("b", "C"), rec("c", "C")]
    metric.fit_normalizer(records)
    assert distance(metric, records[0], records[2]) == pytest.approx(1.0)
    assert distance(metric, records[0], records[1]) == pytest.approx(0.2)


def test_embedding_table_validation(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,2\na,1.0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        EmbeddingTable.from_file(bad)
    nohdr = tmp_path / "nohdr.csv"
    nohdr.write_text("a,1.0,2.0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        EmbeddingTable.from_file(nohdr)


def test_embedding_requires_table():
    with pytest.raises(ValueError):
        DistanceMetric("embedding_euclidean")


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        DistanceMetric("cosine")


# -- pairwise statistics ------------------------------------------------------


def test_stats_degenerate_sample():
    stats = stats_from_values(np.array([0.5, 0.5, 0.5]))
    assert stats.mean == 0.5
    assert stats.std == 0.0
    assert math.isnan(stats.skewness)
    assert stats.degenerate


def test_stats_symmetric_sample():
    stats = stats_from_values(np.array([0.2, 0.4, 0.6]))
    assert stats.skewness == pytest.approx(0.0, abs=1e-12)


def test_stats_hand_moments():
    stats = stats_from_values(np.array([0.0, 0.0, 0.0, 1.0]))
    assert stats.mean == 0.25
    assert stats.skewness == pytest.approx(2.0 / math.sqrt(3.0))
    assert stats.histogram[1].sum() == 4


def test_pairwise_stats_full_enumeration():
    metric = DistanceMetric("tanimoto_binary")
    records = some_records(10, seed=2)
    stats = pairwise_stats(metric, records, max_pairs=1000)
    assert stats.n_pairs == 45
    assert stats.histogram[1].sum() == 45
    assert 0.0 <= stats.mean <= 1.0


def test_pairwise_stats_sampling_is_seeded():
    metric = DistanceMetric("tanimoto_binary")
    records = some_records(30, seed=4)
    first = pairwise_stats(metric, records, max_pairs=100, seed=9)
    second = pairwise_stats(metric, records, max_pairs=100, seed=9)
    assert first.n_pairs == second.n_pairs == 100
    assert first.mean == second.mean
    assert np.array_equal(first.histogram[1], second.histogram[1])


def test_pairwise_stats_identical_molecules_degenerate():
    metric = DistanceMetric("tanimoto_binary")
    records = [rec(f"m{k}", "CCO") for k in range(4)]
    stats = pairwise_stats(metric, records, max_pairs=100)
    assert stats.mean == 0.0
    assert stats.degenerate


def test_pairwise_stats_needs_two_records():
    metric = DistanceMetric("tanimoto_binary")
    with pytest.raises(ValueError):
        pairwise_stats(metric, [rec("a", "C")], max_pairs=10)


# -- nearest neighbors --------------------------------------------------------


def test_nn_query_in_pool():
    metric = DistanceMetric("tanimoto_binary")
    pool = [rec("a", "CCO"), rec("b", "c1ccccc1"), rec("c", "CCN")]
    idx, dist_value = nearest_neighbors(metric, rec("q", "c1ccccc1"), pool, 1)[0]
    assert idx == 1
    assert dist_value == 0.0


def test_nn_ordering_with_crafted_distances(tmp_path):
    table = make_table(
        tmp_path, [("q", [0.0]), ("p0", [0.3]), ("p1", [0.1]), ("p2", [0.2])], dim=1
    )
    metric = DistanceMetric("embedding_euclidean", table=table)
    pool = [rec("p0", "C"), rec("p1", "C"), rec("p2", "C")]
    got = nearest_neighbors(metric, rec("q", "C"), pool, 2)
    assert [k for k, _ in got] == [1, 2]


def test_nn_ties_break_by_pool_index(tmp_path):
    table = make_table(
        tmp_path, [("q", [0.0]), ("p0", [1.0]), ("p1", [1.0]), ("p2", [1.0])], dim=1
    )
    metric = DistanceMetric("embedding_euclidean", table=table)
    pool = [rec("p0", "C"), rec("p1", "C"), rec("p2", "C")]
    got = nearest_neighbors(metric, rec("q", "C"), pool, 2)
    assert [k for k, _ in got] == [0, 1]


def test_nn_matches_exhaustive_scan():
    metric = DistanceMetric("tanimoto_count")
    pool = some_records(50, seed=8)
    query = rec("q", "CCOC(=O)c1ccccc1")
    got = nearest_neighbors(metric, query, pool, 5)
    dists = [distance(metric, query, r) for r in pool]
    want = sorted(range(len(pool)), key=lambda k: (dists[k], k))[:5]
    assert [k for k, _ in got] == want
    for k, d in got:
        assert d == pytest.approx(dists[k])


def test_nn_validates_arguments():
    metric = DistanceMetric("tanimoto_binary")
    with pytest.raises(ValueError):
        nearest_neighbors(metric, rec("q", "C"), [], 1)
    with pytest.raises(ValueError):
        nearest_neighbors(metric, rec("q", "C"), [rec("a", "C")], 2)
