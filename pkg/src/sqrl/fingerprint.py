"""Circular (Morgan-style) count fingerprints and substructure count vectors.

Identifiers come from a fixed, seed-free 64-bit hash so fingerprints are
bit-identical across runs and platforms. Hydrogens never appear as centers;
explicit H atoms and bracket H counts are folded into each heavy atom's
total hydrogen count.
"""

from __future__ import annotations

import hashlib
import time
import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .graphmatch import TimeBudgetExceeded, count_substructure_matches
from .molgraph import MolGraph, heavy_atom_count, parse_smiles

__all__ = [
    "FingerprintConfig",
    "Fingerprint",
    "MorganEnvironment",
    "SubstructureLibrary",
    "morgan_environments",
    "morgan_fingerprint",
    "substructure_counts",
]

_BOND_CODE = {"single": 1, "double": 2, "triple": 3, "aromatic": 4}


def _hash64(data: str) -> int:
    return int.from_bytes(
        hashlib.blake2b(data.encode("utf-8"), digest_size=8).digest(), "big"
    )


@dataclass(frozen=True)
class FingerprintConfig:
    radius: int = 2
    width: int = 2048
    counted: bool = True
    use_chirality: bool = True

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("fingerprint width must be >= 1")
        if not 0 <= self.radius <= 8:
            raise ValueError("fingerprint radius must be in [0, 8]")


@dataclass(frozen=True, eq=False)
class Fingerprint:
    """Folded fixed-width count (or bit) vector."""

    values: np.ndarray
    nnz: int

    def __eq__(self, other):
        return isinstance(other, Fingerprint) and np.array_equal(
            self.values, other.values
        )


@dataclass(frozen=True)
class MorganEnvironment:
    """A surviving atom environment: hashed identifier plus its atom set."""

    identifier: int
    radius: int
    center: int
    atoms: frozenset[int]


def _heavy_graph(mol: MolGraph):
    """Heavy atoms with explicit-H neighbors folded into hydrogen counts."""
    index: dict[int, int] = {}
    heavy = []
    for i, atom in enumerate(mol.atoms):
        if atom.element != "H":
            index[i] = len(heavy)
            heavy.append(atom)
    extra_h = [0] * len(heavy)
    adj: list[list[tuple[int, int]]] = [[] for _ in heavy]
    for bond in mol.bonds:
        a, b = bond.endpoints
        a_heavy, b_heavy = a in index, b in index
        if a_heavy and b_heavy:
            code = _BOND_CODE[bond.order]
            adj[index[a]].append((index[b], code))
            adj[index[b]].append((index[a], code))
        elif a_heavy:
            extra_h[index[a]] += 1
        elif b_heavy:
            extra_h[index[b]] += 1
    return heavy, extra_h, adj


def morgan_environments(
    mol: MolGraph, cfg: FingerprintConfig
) -> list[MorganEnvironment]:
    """Enumerate surviving circular environments up to ``cfg.radius``.

    Initial identifiers hash (element, heavy degree, formal charge, total H,
    ring flag, aromatic flag, and the chirality tag when enabled); each
    iteration rehashes an atom's identifier with its sorted (bond order,
    neighbor identifier) pairs. Environments covering an atom set already
    claimed at the same or a lower radius are dropped (first seen wins).
    """
    heavy, extra_h, adj = _heavy_graph(mol)
    if not heavy:
        return []

    # Degree counts heavy neighbors only, so derive it from adj.
    ids = []
    for k, (atom, extra) in enumerate(zip(heavy, extra_h)):
        key = "|".join(
            [
                "atom",
                atom.element,
                str(len(adj[k])),
                str(atom.formal_charge),
                str(atom.total_h_count + extra),
                str(int(atom.in_ring)),
                str(int(atom.aromatic)),
            ]
            + ([atom.chirality_tag] if cfg.use_chirality else [])
        )
        ids.append(_hash64(key))

    env_atoms = [frozenset([k]) for k in range(len(heavy))]
    seen: set[frozenset[int]] = set()
    survivors: list[MorganEnvironment] = []

    for center in range(len(heavy)):
        seen.add(env_atoms[center])
        survivors.append(
            MorganEnvironment(
                identifier=ids[center],
                radius=0,
                center=center,
                atoms=env_atoms[center],
            )
        )

    for r in range(1, cfg.radius + 1):
        new_ids = []
        new_envs = []
        for center in range(len(heavy)):
            neighborhood = sorted((code, ids[nbr]) for nbr, code in adj[center])
            key = f"env|{r}|{ids[center]}|" + "|".join(
                f"{code}:{nid}" for code, nid in neighborhood
            )
            new_ids.append(_hash64(key))
            grown = set(env_atoms[center])
            for nbr, _ in adj[center]:
                grown |= env_atoms[nbr]
            new_envs.append(frozenset(grown))
        ids, env_atoms = new_ids, new_envs
        for center in range(len(heavy)):
            if env_atoms[center] in seen:
                continue
            seen.add(env_atoms[center])
            survivors.append(
                MorganEnvironment(
                    identifier=ids[center],
                    radius=r,
                    center=center,
                    atoms=env_atoms[center],
                )
            )
    return survivors


def morgan_fingerprint(mol: MolGraph, cfg: FingerprintConfig) -> Fingerprint:
    """Fold surviving environment identifiers into a fixed-width vector."""
    values = np.zeros(cfg.width, dtype=np.int64)
    for env in morgan_environments(mol, cfg):
        pos = env.identifier % cfg.width
        if cfg.counted:
            values[pos] += 1
        else:
            values[pos] = 1
    return Fingerprint(values=values, nnz=int(np.count_nonzero(values)))


@dataclass(frozen=True)
class SubstructureLibrary:
    """Named query graphs for substructure count vectors."""

    entries: tuple[tuple[str, MolGraph], ...]

    def __post_init__(self):
        names = [name for name, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("substructure names must be unique")
        for name, query in self.entries:
            if heavy_atom_count(query) < 1:
                raise ValueError(f"substructure {name!r} has no heavy atoms")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    @classmethod
    def from_pairs(cls, pairs) -> "SubstructureLibrary":
        return cls(
            entries=tuple((name, parse_smiles(smiles)) for name, smiles in pairs)
        )

    @classmethod
    def from_file(cls, path) -> "SubstructureLibrary":
        """Load ``name<TAB>smiles`` records; '#' starts a comment line."""
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "\t" not in line:
                    raise ValueError(
                        f"{path}:{lineno}: expected 'name<TAB>smiles'"
                    )
                name, smiles = line.split("\t", 1)
                pairs.append((name.strip(), smiles.strip()))
        return cls.from_pairs(pairs)

    @classmethod
    def default(cls) -> "SubstructureLibrary":
        """The library of common functional groups shipped with the package."""
        ref = resources.files("sqrl").joinpath("resources/functional_groups.tsv")
        with resources.as_file(ref) as path:
            return cls.from_file(path)


def substructure_counts(
    mol: MolGraph, lib: SubstructureLibrary, budget_s: float | None = None
) -> list[int]:
    """Distinct-match counts of every library query against ``mol``.

    A query whose search exceeds ``budget_s`` seconds contributes 0 and
    raises a ``RuntimeWarning`` naming the entry.
    """
    counts = []
    for name, query in lib.entries:
        deadline = None if budget_s is None else time.monotonic() + budget_s
        try:
            counts.append(count_substructure_matches(mol, query, deadline=deadline))
        except TimeBudgetExceeded:
            warnings.warn(
                f"substructure {name!r} exceeded its time budget; counting 0",
                RuntimeWarning,
                stacklevel=2,
            )
            counts.append(0)
    return counts
