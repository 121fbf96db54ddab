"""Featurizers: the mapping from molecule records to model input vectors.

Two kinds are supported: ``morgan`` (circular count/bit fingerprints computed
in-process) and ``embedding`` (vectors imported from an embedding table
file; no embedding model ever runs here).
"""

from __future__ import annotations

import numpy as np

from .distance import EmbeddingTable
from .fingerprint import FingerprintConfig, morgan_fingerprint

__all__ = ["Featurizer"]


class Featurizer:
    def __init__(
        self,
        kind: str = "morgan",
        fingerprint_config: FingerprintConfig | None = None,
        table: EmbeddingTable | None = None,
        table_path: str | None = None,
    ):
        if kind not in ("morgan", "embedding"):
            raise ValueError(f"unknown featurizer kind {kind!r}")
        self.kind = kind
        self.fingerprint_config = (
            fingerprint_config or FingerprintConfig() if kind == "morgan" else None
        )
        if kind == "embedding" and table is None:
            raise ValueError("embedding featurizer requires a table")
        self.table = table
        self.table_path = table_path
        self._cache: dict[str, np.ndarray] = {}

    @property
    def dimension(self) -> int:
        if self.kind == "morgan":
            return self.fingerprint_config.width
        return self.table.dimension

    def vector(self, record) -> np.ndarray:
        cached = self._cache.get(record.id)
        if cached is not None:
            return cached
        if self.kind == "morgan":
            vec = morgan_fingerprint(record.mol, self.fingerprint_config).values.astype(
                np.float64
            )
        else:
            vec = self.table.vector(record.id).astype(np.float64)
        self._cache[record.id] = vec
        return vec

    def matrix(self, records) -> np.ndarray:
        if not len(records):
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.stack([self.vector(r) for r in records])

    def describe(self) -> dict:
        if self.kind == "morgan":
            cfg = self.fingerprint_config
            return {
                "kind": "morgan",
                "radius": cfg.radius,
                "width": cfg.width,
                "counted": cfg.counted,
                "use_chirality": cfg.use_chirality,
            }
        return {
            "kind": "embedding",
            "dimension": self.table.dimension,
            "table_path": self.table_path,
        }

    @classmethod
    def from_description(
        cls, desc: dict, table: EmbeddingTable | None = None
    ) -> "Featurizer":
        if desc["kind"] == "morgan":
            return cls(
                kind="morgan",
                fingerprint_config=FingerprintConfig(
                    radius=desc["radius"],
                    width=desc["width"],
                    counted=desc["counted"],
                    use_chirality=desc["use_chirality"],
                ),
            )
        if table is None:
            path = desc.get("table_path")
            if not path:
                raise ValueError(
                    "embedding featurizer needs a table or a stored table path"
                )
            table = EmbeddingTable.from_file(path)
        if table.dimension != desc["dimension"]:
            raise ValueError(
                f"embedding table dimension {table.dimension} does not match "
                f"model featurizer dimension {desc['dimension']}"
            )
        return cls(kind="embedding", table=table, table_path=desc.get("table_path"))
