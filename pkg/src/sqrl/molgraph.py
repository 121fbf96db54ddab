"""SMILES parsing into labeled molecular graphs.

Covers the organic subset, bracket atoms (isotope, charge, explicit H,
@/@@ chirality), branches, ring closures (including %nn), the bond symbols
``- = # :``, and aromatic lowercase b, c, n, o, p, s. Directional bond
symbols ``/`` and ``\\`` are accepted and read as single bonds. Aromaticity
is taken from the input annotations; no Huckel re-perception or
kekulization is attempted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

__all__ = [
    "Atom",
    "Bond",
    "MolGraph",
    "SmilesError",
    "SmilesSyntaxError",
    "SmilesValenceError",
    "parse_smiles",
    "heavy_atom_count",
]

# Chirality tags stored on atoms.
CHIRAL_NONE = "none"
CHIRAL_CW = "clockwise"  # @@
CHIRAL_CCW = "counterclockwise"  # @

BOND_ORDERS = ("single", "double", "triple", "aromatic")

# Twice the bond order, so aromatic (1.5) stays integral.
_ORDER_X2 = {"single": 2, "double": 4, "triple": 6, "aromatic": 3}

_BOND_SYMBOLS = {
    "-": "single",
    "=": "double",
    "#": "triple",
    ":": "aromatic",
    "/": "single",  # cis/trans direction discarded
    "\\": "single",
}

# Implicit-hydrogen valences for unbracketed organic-subset atoms.
_DEFAULT_VALENCE = {
    "B": 3, "C": 4, "N": 3, "O": 2, "P": 3, "S": 2,
    "F": 1, "Cl": 1, "Br": 1, "I": 1,
}

_AROMATIC_SYMBOLS = {"b", "c", "n", "o", "p", "s"}

_ELEMENTS = frozenset("""
    H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni
    Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I
    Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt
    Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr
    Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og
""".split())

_BRACKET_RE = re.compile(
    r"^(?P<isotope>\d+)?"
    r"(?P<symbol>[A-Z][a-z]?|[bcnops])"
    r"(?P<chiral>@{1,2})?"
    r"(?P<hcount>H\d*)?"
    r"(?P<charge>\+\+|--|[+-]\d*)?$"
)


class SmilesError(ValueError):
    """Parse failure; ``offset`` is the character position in the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at position {offset})")
        self.offset = offset


class SmilesSyntaxError(SmilesError):
    pass


class SmilesValenceError(SmilesError):
    pass


@dataclass(frozen=True)
class Atom:
    element: str
    formal_charge: int = 0
    isotope: int | None = None
    explicit_h_count: int | None = None
    implicit_h_count: int = 0
    aromatic: bool = False
    in_ring: bool = False
    degree: int = 0
    chirality_tag: str = CHIRAL_NONE

    @property
    def total_h_count(self) -> int:
        return self.implicit_h_count + (self.explicit_h_count or 0)


@dataclass(frozen=True)
class Bond:
    endpoints: tuple[int, int]
    order: str


@dataclass(frozen=True)
class MolGraph:
    """Simple undirected labeled graph over atoms; immutable once built."""

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    source_smiles: str = ""

    def adjacency(self) -> list[list[tuple[int, str]]]:
        """Neighbor lists as (atom index, bond order) pairs."""
        adj: list[list[tuple[int, str]]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            a, b = bond.endpoints
            adj[a].append((b, bond.order))
            adj[b].append((a, bond.order))
        return adj


@dataclass
class _AtomDraft:
    element: str
    offset: int
    aromatic: bool = False
    bracket: bool = False
    formal_charge: int = 0
    isotope: int | None = None
    explicit_h_count: int | None = None
    chirality_tag: str = CHIRAL_NONE
    bonds_x2: int = 0
    degree: int = 0
    in_ring: bool = False
    orders: list[str] = field(default_factory=list)


def _parse_bracket(content: str, offset: int) -> _AtomDraft:
    m = _BRACKET_RE.match(content)
    if m is None:
        raise SmilesSyntaxError(f"malformed bracket atom '[{content}]'", offset)
    symbol = m.group("symbol")
    aromatic = symbol in _AROMATIC_SYMBOLS
    element = symbol.capitalize() if aromatic else symbol
    if element not in _ELEMENTS:
        raise SmilesSyntaxError(f"unknown element '{symbol}'", offset)

    isotope = int(m.group("isotope")) if m.group("isotope") else None

    chiral = CHIRAL_NONE
    if m.group("chiral") == "@":
        chiral = CHIRAL_CCW
    elif m.group("chiral") == "@@":
        chiral = CHIRAL_CW

    hcount = 0
    if m.group("hcount"):
        digits = m.group("hcount")[1:]
        hcount = int(digits) if digits else 1

    charge = 0
    raw = m.group("charge")
    if raw:
        if raw == "++":
            charge = 2
        elif raw == "--":
            charge = -2
        elif len(raw) == 1:
            charge = 1 if raw == "+" else -1
        else:
            charge = int(raw[1:]) * (1 if raw[0] == "+" else -1)

    return _AtomDraft(
        element=element,
        offset=offset,
        aromatic=aromatic,
        bracket=True,
        formal_charge=charge,
        isotope=isotope,
        explicit_h_count=hcount,
        chirality_tag=chiral,
    )


def _find_ring_bonds(n_atoms: int, edges: list[tuple[int, int]]) -> set[int]:
    """Indices of edges on a cycle (non-bridges), via iterative DFS lowpoints."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n_atoms)]
    for ei, (a, b) in enumerate(edges):
        adj[a].append((b, ei))
        adj[b].append((a, ei))

    disc = [-1] * n_atoms
    low = [0] * n_atoms
    bridges: set[int] = set()
    counter = 0
    for root in range(n_atoms):
        if disc[root] != -1:
            continue
        stack: list[tuple[int, int, int]] = [(root, -1, 0)]  # node, in-edge, child ptr
        while stack:
            node, in_edge, ptr = stack.pop()
            if ptr == 0:
                disc[node] = low[node] = counter
                counter += 1
            if ptr < len(adj[node]):
                stack.append((node, in_edge, ptr + 1))
                nbr, ei = adj[node][ptr]
                if ei == in_edge:
                    continue
                if disc[nbr] == -1:
                    stack.append((nbr, ei, 0))
                else:
                    low[node] = min(low[node], disc[nbr])
            elif in_edge != -1:
                parent = edges[in_edge][0] if edges[in_edge][1] == node else edges[in_edge][1]
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    bridges.add(in_edge)
    return {ei for ei in range(len(edges)) if ei not in bridges}


def parse_smiles(smiles: str) -> MolGraph:
    """Parse a SMILES string into a validated :class:`MolGraph`.

    Raises :class:`SmilesSyntaxError` for malformed input and
    :class:`SmilesValenceError` when explicit bonds exceed the allowed
    valence of an unbracketed atom; both carry the character offset.
    A failure never yields a partial graph.
    """
    if not isinstance(smiles, str) or not smiles:
        raise SmilesSyntaxError("empty SMILES", 0)

    drafts: list[_AtomDraft] = []
    edges: list[tuple[int, int]] = []
    edge_orders: list[str] = []
    seen_pairs: set[frozenset[int]] = set()

    prev: int | None = None
    pending: tuple[str, int] | None = None  # (order, offset of bond symbol)
    branch_stack: list[int | None] = []
    # ring number -> (atom index, order or None, offset of opening digit)
    open_rings: dict[int, tuple[int, str | None, int]] = {}

    def add_edge(a: int, b: int, order: str | None, offset: int) -> None:
        if a == b:
            raise SmilesSyntaxError("ring bond to the same atom", offset)
        pair = frozenset((a, b))
        if pair in seen_pairs:
            raise SmilesSyntaxError("duplicate bond between the same atoms", offset)
        if order is None:
            order = "aromatic" if drafts[a].aromatic and drafts[b].aromatic else "single"
        if order == "aromatic" and not (drafts[a].aromatic and drafts[b].aromatic):
            raise SmilesSyntaxError("aromatic bond between non-aromatic atoms", offset)
        seen_pairs.add(pair)
        edges.append((a, b))
        edge_orders.append(order)
        for idx in (a, b):
            drafts[idx].bonds_x2 += _ORDER_X2[order]
            drafts[idx].degree += 1

    def add_atom(draft: _AtomDraft) -> None:
        nonlocal prev, pending
        drafts.append(draft)
        idx = len(drafts) - 1
        if prev is not None:
            order, off = pending if pending is not None else (None, draft.offset)
            add_edge(prev, idx, order, off)
        elif pending is not None:
            raise SmilesSyntaxError("bond symbol without a preceding atom", pending[1])
        prev = idx
        pending = None

    i = 0
    n = len(smiles)
    while i < n:
        ch = smiles[i]

        if ch == "(":
            if prev is None:
                raise SmilesSyntaxError("branch before any atom", i)
            if pending is not None:
                raise SmilesSyntaxError("bond symbol before '('", pending[1])
            branch_stack.append(prev)
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise SmilesSyntaxError("unmatched ')'", i)
            if pending is not None:
                raise SmilesSyntaxError("dangling bond symbol before ')'", pending[1])
            prev = branch_stack.pop()
            i += 1
        elif ch in _BOND_SYMBOLS:
            if pending is not None:
                raise SmilesSyntaxError("two consecutive bond symbols", i)
            pending = (_BOND_SYMBOLS[ch], i)
            i += 1
        elif ch == ".":
            if pending is not None:
                raise SmilesSyntaxError("bond symbol before '.'", pending[1])
            prev = None
            i += 1
        elif ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesSyntaxError("ring closure before any atom", i)
            if ch == "%":
                tail = smiles[i + 1 : i + 3]
                if len(tail) < 2 or not tail.isdigit():
                    raise SmilesSyntaxError("'%' must be followed by two digits", i)
                num = int(tail)
                width = 3
            else:
                num = int(ch)
                width = 1
            order = pending[0] if pending is not None else None
            if num in open_rings:
                o_atom, o_order, o_off = open_rings.pop(num)
                if order is not None and o_order is not None and order != o_order:
                    raise SmilesSyntaxError(f"conflicting bond orders for ring {num}", i)
                add_edge(prev, o_atom, order if order is not None else o_order, i)
            else:
                open_rings[num] = (prev, order, i)
            pending = None
            i += width
        elif ch == "[":
            close = smiles.find("]", i)
            if close < 0:
                raise SmilesSyntaxError("unclosed '['", i)
            add_atom(_parse_bracket(smiles[i + 1 : close], i))
            i = close + 1
        elif ch.isupper():
            if smiles[i : i + 2] in ("Cl", "Br"):
                symbol, width = smiles[i : i + 2], 2
            elif ch in _DEFAULT_VALENCE:
                symbol, width = ch, 1
            else:
                raise SmilesSyntaxError(f"element '{ch}' requires brackets", i)
            add_atom(_AtomDraft(element=symbol, offset=i))
            i += width
        elif ch in _AROMATIC_SYMBOLS:
            add_atom(_AtomDraft(element=ch.upper(), offset=i, aromatic=True))
            i += 1
        else:
            raise SmilesSyntaxError(f"unexpected character {ch!r}", i)

    if branch_stack:
        raise SmilesSyntaxError("unclosed '('", n - 1)
    if pending is not None:
        raise SmilesSyntaxError("dangling bond symbol", pending[1])
    if open_rings:
        num, (_, _, off) = next(iter(open_rings.items()))
        raise SmilesSyntaxError(f"unmatched ring closure {num}", off)
    if not drafts:
        raise SmilesSyntaxError("no atoms in SMILES", 0)

    ring_edges = _find_ring_bonds(len(drafts), edges)
    for ei in ring_edges:
        a, b = edges[ei]
        drafts[a].in_ring = True
        drafts[b].in_ring = True

    atoms = []
    for draft in drafts:
        if draft.aromatic and not draft.in_ring:
            raise SmilesSyntaxError("aromatic atom outside any ring", draft.offset)
        implicit_h = 0
        if not draft.bracket:
            valence = _DEFAULT_VALENCE[draft.element]
            needed = -(-draft.bonds_x2 // 2)  # ceil; aromatic bonds count 1.5
            implicit_h = valence - needed
            if implicit_h < 0:
                # A lone unit of deficit on an aromatic atom is the
                # delocalized contribution (e.g. furan O, fused-ring C).
                if draft.aromatic and implicit_h == -1:
                    implicit_h = 0
                else:
                    raise SmilesValenceError(
                        f"valence of {draft.element} exceeded "
                        f"({needed} bonds > {valence})",
                        draft.offset,
                    )
        atoms.append(
            Atom(
                element=draft.element,
                formal_charge=draft.formal_charge,
                isotope=draft.isotope,
                explicit_h_count=draft.explicit_h_count,
                implicit_h_count=implicit_h,
                aromatic=draft.aromatic,
                in_ring=draft.in_ring,
                degree=draft.degree,
                chirality_tag=draft.chirality_tag,
            )
        )

    bonds = tuple(
        Bond(endpoints=pair, order=order) for pair, order in zip(edges, edge_orders)
    )
    return MolGraph(atoms=tuple(atoms), bonds=bonds, source_smiles=smiles)


def heavy_atom_count(mol: MolGraph) -> int:
    """Number of non-hydrogen atoms."""
    return sum(1 for atom in mol.atoms if atom.element != "H")
