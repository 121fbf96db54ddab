"""Labeled graph matching: substructure match counting and connected MCS.

Atoms are compatible when element and aromatic flag agree; bonds must agree
on order. Hydrogen atoms are ignored throughout, matching the heavy-atom
conventions of the fingerprint and distance layers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .molgraph import MolGraph

__all__ = [
    "TimeBudgetExceeded",
    "McsResult",
    "count_substructure_matches",
    "connected_mcs_size",
]


class TimeBudgetExceeded(RuntimeError):
    """Raised when a matching search runs past its deadline."""


@dataclass(frozen=True)
class McsResult:
    """Size (heavy atoms) of the best common connected subgraph found.

    ``exact`` is False when the search hit its time budget, in which case
    ``size`` is a lower bound on the true maximum.
    """

    size: int
    exact: bool


def _heavy_view(mol: MolGraph):
    """Heavy-atom labels and bond-order lookup, reindexed densely."""
    index = {}
    labels = []
    for i, atom in enumerate(mol.atoms):
        if atom.element == "H":
            continue
        index[i] = len(labels)
        labels.append((atom.element, atom.aromatic))
    bonds: dict[tuple[int, int], str] = {}
    adj: list[list[tuple[int, str]]] = [[] for _ in labels]
    for bond in mol.bonds:
        a, b = bond.endpoints
        if a in index and b in index:
            u, v = index[a], index[b]
            bonds[(u, v)] = bonds[(v, u)] = bond.order
            adj[u].append((v, bond.order))
            adj[v].append((u, bond.order))
    return labels, bonds, adj


def _match_order(n: int, adj) -> list[int]:
    """Visit order that keeps each atom adjacent to an earlier one when possible."""
    order: list[int] = []
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        queue = [start]
        seen[start] = True
        while queue:
            node = queue.pop(0)
            order.append(node)
            for nbr, _ in adj[node]:
                if not seen[nbr]:
                    seen[nbr] = True
                    queue.append(nbr)
    return order


def count_substructure_matches(
    target: MolGraph, query: MolGraph, deadline: float | None = None
) -> int:
    """Number of distinct heavy-atom index sets of ``target`` matched by ``query``.

    Counts subgraph monomorphisms (every query bond must map onto a target
    bond of equal order), collapsing automorphic mappings by their image set.
    Raises :class:`TimeBudgetExceeded` when ``deadline`` (monotonic time)
    passes mid-search.
    """
    q_labels, q_bonds, q_adj = _heavy_view(query)
    t_labels, t_bonds, t_adj = _heavy_view(target)
    nq, nt = len(q_labels), len(t_labels)
    if nq == 0 or nq > nt:
        return 0

    order = _match_order(nq, q_adj)
    images: set[frozenset[int]] = set()
    mapping: dict[int, int] = {}
    used = [False] * nt

    def candidates(qa: int):
        anchored = [
            (mapping[nbr], bond_order)
            for nbr, bond_order in q_adj[qa]
            if nbr in mapping
        ]
        if anchored:
            anchor, want = anchored[0]
            pool = [t for t, got in t_adj[anchor] if got == want]
        else:
            pool = range(nt)
        for t in pool:
            if used[t] or t_labels[t] != q_labels[qa]:
                continue
            ok = True
            for m_img, want in anchored:
                if t_bonds.get((m_img, t)) != want:
                    ok = False
                    break
            if ok:
                yield t

    def extend(depth: int) -> None:
        if deadline is not None and time.monotonic() > deadline:
            raise TimeBudgetExceeded("substructure match budget exceeded")
        if depth == nq:
            images.add(frozenset(mapping.values()))
            return
        qa = order[depth]
        for t in candidates(qa):
            mapping[qa] = t
            used[t] = True
            extend(depth + 1)
            used[t] = False
            del mapping[qa]

    extend(0)
    return len(images)


def connected_mcs_size(
    mol_a: MolGraph, mol_b: MolGraph, budget_s: float | None = 1.0
) -> McsResult:
    """Heavy-atom count of the maximum common connected induced subgraph.

    Searches for a maximum clique in the modular product of the two heavy-atom
    graphs, restricted to cliques that are connected through bond-preserving
    (strong) edges. When the time budget runs out the best clique found so
    far is returned with ``exact=False``.
    """
    a_labels, a_bonds, _ = _heavy_view(mol_a)
    b_labels, b_bonds, _ = _heavy_view(mol_b)
    na, nb = len(a_labels), len(b_labels)

    pairs = [
        (i, j)
        for i in range(na)
        for j in range(nb)
        if a_labels[i] == b_labels[j]
    ]
    if not pairs:
        return McsResult(size=0, exact=True)

    n = len(pairs)
    compat = [0] * n  # may share a common subgraph (induced consistency)
    strong = [0] * n  # additionally joined by a matching bond
    for p in range(n):
        i, j = pairs[p]
        for q in range(p + 1, n):
            k, l = pairs[q]
            if i == k or j == l:
                continue
            oa = a_bonds.get((i, k))
            ob = b_bonds.get((j, l))
            if oa is None and ob is None:
                compat[p] |= 1 << q
                compat[q] |= 1 << p
            elif oa is not None and oa == ob:
                compat[p] |= 1 << q
                compat[q] |= 1 << p
                strong[p] |= 1 << q
                strong[q] |= 1 << p

    deadline = None if budget_s is None else time.monotonic() + budget_s
    best = 1  # a single compatible atom pair always exists here
    exact = True

    def search(size: int, allowed: int, frontier: int) -> None:
        nonlocal best, exact
        if deadline is not None and time.monotonic() > deadline:
            raise TimeBudgetExceeded
        if size > best:
            best = size
        if size + allowed.bit_count() <= best:
            return
        while frontier:
            v_bit = frontier & -frontier
            v = v_bit.bit_length() - 1
            allowed &= ~v_bit
            frontier &= ~v_bit
            if size + 1 + (allowed & compat[v]).bit_count() > best:
                search(
                    size + 1,
                    allowed & compat[v],
                    (frontier | strong[v]) & allowed & compat[v],
                )

    try:
        later = (1 << n) - 1
        for p in range(n):
            later &= ~(1 << p)
            # Cliques whose lowest-index vertex is p: restrict to later pairs.
            search(1, compat[p] & later, strong[p] & later)
            if best >= min(na, nb):
                break
    except TimeBudgetExceeded:
        exact = False

    return McsResult(size=best, exact=exact)
