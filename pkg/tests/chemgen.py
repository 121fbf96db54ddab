"""Seeded random small-molecule generator for tests.

Grows a valence-respecting graph (optionally seeded with an aromatic ring),
then serializes it to SMILES so every generated molecule round-trips through
the parser like real input would.
"""

from __future__ import annotations

import numpy as np

VALENCE = {"C": 4, "N": 3, "O": 2, "S": 2, "F": 1, "Cl": 1, "Br": 1}
_GROW_ELEMENTS = ["C", "C", "C", "C", "N", "N", "O", "O", "S", "F", "Cl"]


class _Draft:
    def __init__(self):
        self.elements: list[str] = []
        self.aromatic: list[bool] = []
        self.spare: list[int] = []
        self.edges: dict[tuple[int, int], str] = {}

    def add_atom(self, element: str, aromatic: bool, spare: int) -> int:
        self.elements.append(element)
        self.aromatic.append(aromatic)
        self.spare.append(spare)
        return len(self.elements) - 1

    def add_edge(self, a: int, b: int, order: str) -> None:
        self.edges[(min(a, b), max(a, b))] = order

    def neighbors(self, v: int) -> list[int]:
        out = []
        for (a, b) in self.edges:
            if a == v:
                out.append(b)
            elif b == v:
                out.append(a)
        return out


def _seed_aromatic_ring(draft: _Draft, rng: np.random.Generator, size: int) -> None:
    if size == 6:
        n_nitrogen = int(rng.integers(0, 3))
        elements = ["N"] * n_nitrogen + ["C"] * (6 - n_nitrogen)
        rng.shuffle(elements)
        spares = [0 if e == "N" else 1 for e in elements]
    else:
        hetero = "O" if rng.random() < 0.5 else "S"
        elements = ["C", "C", "C", "C", hetero]
        rng.shuffle(elements)
        spares = [0 if e in ("O", "S") else 1 for e in elements]
    first = len(draft.elements)
    for element, spare in zip(elements, spares):
        draft.add_atom(element, aromatic=True, spare=spare)
    for k in range(size):
        draft.add_edge(first + k, first + (k + 1) % size, "aromatic")


def random_molecule_smiles(rng: np.random.Generator, max_heavy: int = 8) -> str:
    """A random valence-consistent SMILES with at most ``max_heavy`` atoms."""
    n_target = int(rng.integers(1, max_heavy + 1))
    draft = _Draft()

    if n_target >= 5 and rng.random() < 0.35:
        size = 6 if n_target >= 6 and rng.random() < 0.7 else 5
        _seed_aromatic_ring(draft, rng, size)
    else:
        element = _GROW_ELEMENTS[int(rng.integers(len(_GROW_ELEMENTS)))]
        draft.add_atom(element, aromatic=False, spare=VALENCE[element])

    while len(draft.elements) < n_target:
        donors = [k for k, s in enumerate(draft.spare) if s >= 1]
        if not donors:
            break
        donor = donors[int(rng.integers(len(donors)))]
        element = _GROW_ELEMENTS[int(rng.integers(len(_GROW_ELEMENTS)))]
        order = "single"
        if (
            draft.spare[donor] >= 2
            and VALENCE[element] >= 2
            and rng.random() < 0.15
        ):
            order = "double"
        cost = 2 if order == "double" else 1
        new = draft.add_atom(element, aromatic=False, spare=VALENCE[element] - cost)
        draft.add_edge(donor, new, order)
        draft.spare[donor] -= cost

    # Occasionally close one extra (aliphatic) ring.
    if len(draft.elements) >= 4 and rng.random() < 0.2:
        candidates = [
            (a, b)
            for a in range(len(draft.elements))
            for b in range(a + 1, len(draft.elements))
            if draft.spare[a] >= 1
            and draft.spare[b] >= 1
            and (a, b) not in draft.edges
        ]
        if candidates:
            a, b = candidates[int(rng.integers(len(candidates)))]
            draft.add_edge(a, b, "single")
            draft.spare[a] -= 1
            draft.spare[b] -= 1

    return write_smiles(draft)


def write_smiles(draft: _Draft) -> str:
    """Serialize via DFS spanning tree plus ring-closure digits."""
    n = len(draft.elements)
    adj: list[list[int]] = [[] for _ in range(n)]
    for (a, b) in draft.edges:
        adj[a].append(b)
        adj[b].append(a)

    visited = [False] * n
    tree_children: list[list[int]] = [[] for _ in range(n)]
    ring_edges: list[tuple[int, int]] = []
    stack = [(0, -1)]
    seen_edges: set[tuple[int, int]] = set()
    visited[0] = True
    order = []
    while stack:
        node, parent = stack.pop()
        order.append(node)
        for nbr in sorted(adj[node], reverse=True):
            key = (min(node, nbr), max(node, nbr))
            if key in seen_edges:
                continue
            if visited[nbr]:
                seen_edges.add(key)
                ring_edges.append((node, nbr))
            else:
                seen_edges.add(key)
                visited[nbr] = True
                tree_children[node].append(nbr)
                stack.append((nbr, node))

    ring_digit = {}
    ring_at: dict[int, list[tuple[int, int]]] = {}
    for digit, (a, b) in enumerate(ring_edges, start=1):
        key = (min(a, b), max(a, b))
        ring_digit[key] = digit
        ring_at.setdefault(a, []).append((digit, b))
        ring_at.setdefault(b, []).append((digit, a))

    emitted_ring: set[int] = set()

    def bond_symbol(a: int, b: int) -> str:
        order = draft.edges[(min(a, b), max(a, b))]
        if order == "double":
            return "="
        if order == "triple":
            return "#"
        if order == "single" and draft.aromatic[a] and draft.aromatic[b]:
            return "-"
        return ""

    def atom_token(v: int) -> str:
        element = draft.elements[v]
        return element.lower() if draft.aromatic[v] else element

    def emit(v: int) -> str:
        out = atom_token(v)
        for digit, other in ring_at.get(v, []):
            if digit in emitted_ring:
                out += str(digit)
            else:
                emitted_ring.add(digit)
                out += bond_symbol(v, other) + str(digit)
        kids = tree_children[v]
        for child in kids[:-1]:
            out += "(" + bond_symbol(v, child) + emit(child) + ")"
        if kids:
            last = kids[-1]
            out += bond_symbol(v, last) + emit(last)
        return out

    return emit(0)
