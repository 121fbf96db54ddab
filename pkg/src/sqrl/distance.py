"""Molecular distance metrics, pairwise-distance statistics, neighbor search.

Supported kinds:

- ``tanimoto_binary``: Jaccard distance over the nonzero positions of folded
  circular fingerprints.
- ``tanimoto_count``: generalized Jaccard (1 - sum(min)/sum(max)) over count
  fingerprints.
- ``substructure_jaccard``: generalized Jaccard over substructure count
  vectors from a query library.
- ``mcs``: 1 - 2*N_common / (N_i + N_j) with N_common the heavy-atom count
  of the maximum common connected subgraph.
- ``embedding_euclidean``: L2 distance between imported embedding rows.

Molecule records are duck-typed: anything with an ``id`` (stable unique
string) and a ``mol`` (:class:`~sqrl.molgraph.MolGraph`) attribute works.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fingerprint import (
    FingerprintConfig,
    SubstructureLibrary,
    morgan_fingerprint,
    substructure_counts,
)
from .graphmatch import connected_mcs_size
from .molgraph import heavy_atom_count

__all__ = [
    "METRIC_KINDS",
    "DistanceMetric",
    "EmbeddingTable",
    "MissingEmbeddingError",
    "DistStats",
    "tanimoto_binary",
    "tanimoto_count",
    "generalized_jaccard",
    "distance",
    "distance_matrix",
    "pairwise_stats",
    "nearest_neighbors",
]

METRIC_KINDS = (
    "tanimoto_binary",
    "tanimoto_count",
    "substructure_jaccard",
    "mcs",
    "embedding_euclidean",
)


class MissingEmbeddingError(KeyError):
    """An embedding table has no row for the requested molecule id."""


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Read-only molecule-id -> vector mapping imported from file."""

    dimension: int
    rows: dict[str, np.ndarray]

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("embedding dimension must be >= 1")
        for key, vec in self.rows.items():
            if vec.shape != (self.dimension,) or not np.all(np.isfinite(vec)):
                raise ValueError(f"embedding row {key!r} is not a finite "
                                 f"vector of length {self.dimension}")

    def vector(self, molecule_id: str) -> np.ndarray:
        try:
            return self.rows[molecule_id]
        except KeyError:
            raise MissingEmbeddingError(
                f"no embedding row for molecule id {molecule_id!r}"
            ) from None

    @classmethod
    def from_file(cls, path) -> "EmbeddingTable":
        """Load the ``id,<dim>`` header format: one id plus dim floats per row."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if (
                header is None
                or len(header) != 2
                or header[0].strip() != "id"
                or not header[1].strip().isdigit()
            ):
                raise ValueError(f"{path}: expected header 'id,<dimension>'")
            dim = int(header[1])
            rows: dict[str, np.ndarray] = {}
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != dim + 1:
                    raise ValueError(
                        f"{path}:{lineno}: expected id plus {dim} values"
                    )
                key = row[0].strip()
                if key in rows:
                    raise ValueError(f"{path}:{lineno}: duplicate id {key!r}")
                rows[key] = np.array([float(x) for x in row[1:]], dtype=np.float64)
        return cls(dimension=dim, rows=rows)


@dataclass(frozen=True, eq=False)
class DistStats:
    """Moments and histogram of a (sampled) pairwise distance distribution.

    ``skewness`` and ``excess_kurtosis`` are NaN for degenerate samples in
    which every distance is equal.
    """

    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    histogram: tuple[np.ndarray, np.ndarray]  # (bin edges, counts)
    n_pairs: int

    @property
    def degenerate(self) -> bool:
        return math.isnan(self.skewness)


def tanimoto_binary(u: np.ndarray, v: np.ndarray) -> float:
    """Jaccard distance over nonzero positions; 0 when both are empty."""
    a = np.asarray(u) > 0
    b = np.asarray(v) > 0
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 0.0
    inter = int(np.count_nonzero(a & b))
    return 1.0 - inter / union


def generalized_jaccard(u: np.ndarray, v: np.ndarray) -> float:
    """1 - sum(min)/sum(max) over nonnegative count vectors; 0 when both empty."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    denom = float(np.maximum(u, v).sum())
    if denom == 0.0:
        return 0.0
    return 1.0 - float(np.minimum(u, v).sum()) / denom


# The count-vector Tanimoto is exactly the generalized Jaccard distance.
tanimoto_count = generalized_jaccard


class DistanceMetric:
    """A distance kind plus the featurization parameters it needs.

    Feature vectors are cached per molecule id, so records passed to the same
    metric instance must carry unique ids.
    """

    def __init__(
        self,
        kind: str,
        *,
        fingerprint_config: FingerprintConfig | None = None,
        library: SubstructureLibrary | None = None,
        mcs_budget_s: float | None = 1.0,
        substructure_budget_s: float | None = 10.0,
        table: EmbeddingTable | None = None,
        normalize_embeddings: bool = False,
    ):
        if kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {kind!r}")
        self.kind = kind
        if kind in ("tanimoto_binary", "tanimoto_count"):
            self.fingerprint_config = fingerprint_config or FingerprintConfig()
        else:
            self.fingerprint_config = fingerprint_config
        if kind == "substructure_jaccard":
            self.library = library if library is not None else SubstructureLibrary.default()
        else:
            self.library = library
        if kind == "embedding_euclidean" and table is None:
            raise ValueError("embedding_euclidean requires an embedding table")
        self.table = table
        self.mcs_budget_s = mcs_budget_s
        self.substructure_budget_s = substructure_budget_s
        self.normalize_embeddings = normalize_embeddings
        self._scale: float | None = None
        self._cache: dict[str, np.ndarray] = {}

    def describe(self) -> dict:
        """Artifact-metadata summary of the metric and its parameters."""
        info: dict = {"kind": self.kind}
        if self.kind in ("tanimoto_binary", "tanimoto_count"):
            cfg = self.fingerprint_config
            info["fingerprint"] = {
                "radius": cfg.radius,
                "width": cfg.width,
                "counted": cfg.counted,
                "use_chirality": cfg.use_chirality,
            }
        elif self.kind == "substructure_jaccard":
            info["library_size"] = len(self.library)
        elif self.kind == "mcs":
            info["mcs_budget_s"] = self.mcs_budget_s
        elif self.kind == "embedding_euclidean":
            info["embedding_dimension"] = self.table.dimension
            info["normalize_embeddings"] = self.normalize_embeddings
        return info

    # -- featurization ----------------------------------------------------

    def feature_vector(self, record) -> np.ndarray:
        """The vector this metric compares, cached by molecule id."""
        cached = self._cache.get(record.id)
        if cached is not None:
            return cached
        if self.kind in ("tanimoto_binary", "tanimoto_count"):
            vec = morgan_fingerprint(record.mol, self.fingerprint_config).values
        elif self.kind == "substructure_jaccard":
            vec = np.array(
                substructure_counts(
                    record.mol, self.library, budget_s=self.substructure_budget_s
                ),
                dtype=np.int64,
            )
        elif self.kind == "embedding_euclidean":
            vec = self.table.vector(record.id)
        else:
            raise ValueError(f"{self.kind} has no feature vector")
        self._cache[record.id] = vec
        return vec

    def feature_matrix(self, records) -> np.ndarray:
        return np.stack([self.feature_vector(r) for r in records]).astype(np.float64)

    def fit_normalizer(self, records) -> None:
        """Scale embedding distances by the dataset's max pairwise distance."""
        if self.kind != "embedding_euclidean" or not self.normalize_embeddings:
            return
        self._scale = None
        mat = self._raw_matrix(records)
        peak = float(mat.max()) if mat.size else 0.0
        self._scale = peak if peak > 0 else None

    # -- distances ---------------------------------------------------------

    def distance(self, a, b) -> float:
        if self.kind == "tanimoto_binary":
            value = tanimoto_binary(self.feature_vector(a), self.feature_vector(b))
        elif self.kind in ("tanimoto_count", "substructure_jaccard"):
            value = generalized_jaccard(self.feature_vector(a), self.feature_vector(b))
        elif self.kind == "mcs":
            value = self._mcs_distance(a, b)
        else:
            diff = self.feature_vector(a) - self.feature_vector(b)
            value = float(np.sqrt(np.dot(diff, diff)))
            if self._scale:
                value /= self._scale
        return value

    def _mcs_distance(self, a, b) -> float:
        result = connected_mcs_size(a.mol, b.mol, budget_s=self.mcs_budget_s)
        if not result.exact:
            warnings.warn(
                f"MCS budget exhausted for ({a.id}, {b.id}); "
                "distance uses the best common subgraph found",
                RuntimeWarning,
                stacklevel=3,
            )
        n_a = heavy_atom_count(a.mol)
        n_b = heavy_atom_count(b.mol)
        return 1.0 - 2.0 * result.size / (n_a + n_b)

    def distances_to(self, query, pool) -> np.ndarray:
        """Distances from one query record to every pool record."""
        if not len(pool):
            return np.zeros(0, dtype=np.float64)
        if self.kind == "mcs":
            return np.array([self.distance(query, r) for r in pool], dtype=np.float64)
        q = self.feature_vector(query).astype(np.float64)
        mat = self.feature_matrix(pool)
        if self.kind == "tanimoto_binary":
            qb = q > 0
            mb = mat > 0
            inter = (mb & qb).sum(axis=1)
            union = (mb | qb).sum(axis=1)
            out = np.ones(len(mat))
            np.divide(inter, union, out=out, where=union > 0)
            dist = 1.0 - out
            dist[union == 0] = 0.0
            return dist
        if self.kind in ("tanimoto_count", "substructure_jaccard"):
            mins = np.minimum(mat, q).sum(axis=1)
            maxs = np.maximum(mat, q).sum(axis=1)
            out = np.ones(len(mat))
            np.divide(mins, maxs, out=out, where=maxs > 0)
            dist = 1.0 - out
            dist[maxs == 0] = 0.0
            return dist
        diff = mat - q
        dist = np.sqrt((diff * diff).sum(axis=1))
        if self._scale:
            dist = dist / self._scale
        return dist

    def _raw_matrix(self, records) -> np.ndarray:
        n = len(records)
        out = np.zeros((n, n), dtype=np.float64)
        if self.kind == "mcs":
            for i in range(n):
                for j in range(i + 1, n):
                    out[i, j] = out[j, i] = self.distance(records[i], records[j])
            return out
        for i in range(n):
            row = self.distances_to(records[i], records[i + 1 :])
            out[i, i + 1 :] = row
            out[i + 1 :, i] = row
        return out

    def matrix(self, records) -> np.ndarray:
        """Full symmetric pairwise distance matrix with zero diagonal."""
        return self._raw_matrix(records)


def distance(metric: DistanceMetric, a, b) -> float:
    """Distance between two molecule records under ``metric``."""
    return metric.distance(a, b)


def distance_matrix(metric: DistanceMetric, records) -> np.ndarray:
    return metric.matrix(records)


def _sample_pair_indices(
    n: int, max_pairs: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    total = n * (n - 1) // 2
    if total <= max_pairs:
        iu = np.triu_indices(n, k=1)
        return iu[0], iu[1]
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < max_pairs:
        draw = rng.integers(0, total, size=max_pairs)
        for lin in draw.tolist():
            if lin not in seen:
                seen.add(lin)
                chosen.append(lin)
                if len(chosen) == max_pairs:
                    break
    lin = np.array(chosen, dtype=np.int64)
    # Unrank upper-triangular linear indices to (i, j), i < j.
    i = (n - 2 - np.floor(
        np.sqrt(-8.0 * lin + 4.0 * n * (n - 1) - 7.0) / 2.0 - 0.5
    )).astype(np.int64)
    j = lin + i + 1 - (n * (n - 1) // 2) + ((n - i) * (n - i - 1)) // 2
    return i, j


def pairwise_stats(
    metric: DistanceMetric,
    records,
    max_pairs: int = 200_000,
    *,
    seed: int = 0,
    bins: int = 50,
) -> DistStats:
    """Moments and histogram over (sampled) unordered pairwise distances.

    All pairs are used when their count is at most ``max_pairs``; otherwise a
    seeded uniform sample of ``max_pairs`` distinct pairs is taken. Skewness
    is m3/m2^1.5 and excess kurtosis m4/m2^2 - 3 over central sample moments;
    both are NaN when every sampled distance is equal.
    """
    if len(records) < 2:
        raise ValueError("pairwise statistics need at least 2 records")
    if max_pairs < 1:
        raise ValueError("max_pairs must be positive")
    rng = np.random.default_rng(seed)
    ii, jj = _sample_pair_indices(len(records), max_pairs, rng)
    values = np.array(
        [metric.distance(records[i], records[j]) for i, j in zip(ii, jj)],
        dtype=np.float64,
    )
    return stats_from_values(values, bins=bins)


def stats_from_values(values: np.ndarray, bins: int = 50) -> DistStats:
    """Build :class:`DistStats` from raw distance samples."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    centered = values - mean
    m2 = float((centered**2).mean())
    if m2 == 0.0:
        skew = float("nan")
        kurt = float("nan")
    else:
        skew = float((centered**3).mean() / m2**1.5)
        kurt = float((centered**4).mean() / m2**2 - 3.0)
    counts, edges = np.histogram(values, bins=bins)
    return DistStats(
        mean=mean,
        std=float(np.sqrt(m2)),
        skewness=skew,
        excess_kurtosis=kurt,
        histogram=(edges, counts),
        n_pairs=len(values),
    )


def nearest_neighbors(
    metric: DistanceMetric, query, pool, n: int
) -> list[tuple[int, float]]:
    """The ``n`` pool entries nearest to ``query``, ascending by distance.

    Ties break toward the lower pool index, so results are deterministic.
    """
    if not len(pool):
        raise ValueError("pool must be non-empty")
    if not 1 <= n <= len(pool):
        raise ValueError("n must be in [1, len(pool)]")
    dist = metric.distances_to(query, pool)
    order = np.argsort(dist, kind="stable")[:n]
    return [(int(k), float(dist[k])) for k in order]
