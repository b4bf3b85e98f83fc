"""Canonical atom ordering and the canonical SMILES writer.

Ordering uses iterative invariant refinement; remaining ties are broken by
branching over every atom of the first tied class and keeping the labeling
with the lexicographically smallest graph signature. Branch leaves that come
from genuine symmetries produce equal signatures, so the result is invariant
under any input atom permutation, and two molecules share a canonical string
exactly when their labeled graphs are isomorphic.
"""

from __future__ import annotations

import heapq
import sys

from .model import AROMATIC_ORGANIC, ORGANIC_SUBSET, Atom, BondOrder, Molecule

_MAX_LEAVES = 50_000


def _dense(keys: list) -> list[int]:
    order = {key: i for i, key in enumerate(sorted(set(keys)))}
    return [order[key] for key in keys]


def _refine(colors: list[int], adj: list[list[tuple[int, int]]]) -> list[int]:
    n = len(colors)
    while True:
        keys = [
            (colors[a], tuple(sorted((order, colors[b]) for b, order in adj[a])))
            for a in range(n)
        ]
        new = _dense(keys)
        if new == colors:
            return colors
        colors = new


def _signature(mol: Molecule, colors: list[int]) -> tuple:
    position = [0] * len(colors)
    for atom_idx, color in enumerate(colors):
        position[color] = atom_idx
    atom_part = tuple(mol.atoms[position[c]].label() for c in range(len(colors)))
    bond_part = tuple(
        sorted(
            (min(colors[b.a], colors[b.b]), max(colors[b.a], colors[b.b]), int(b.order))
            for b in mol.bonds
        )
    )
    return (atom_part, bond_part)


def canonical_ranks(mol: Molecule) -> list[int]:
    """Assign each atom a unique rank in 0..n-1, independent of input order."""
    n = len(mol.atoms)
    if n == 0:
        return []
    adj = [[(b, int(order)) for b, order in row] for row in mol.neighbors()]
    initial = _dense([(a.label(), len(adj[a.index])) for a in mol.atoms])

    best_sig: tuple | None = None
    best_colors: list[int] | None = None
    leaves = 0

    stack = [initial]
    while stack:
        colors = _refine(stack.pop(), adj)
        cells: dict[int, list[int]] = {}
        for atom_idx, color in enumerate(colors):
            cells.setdefault(color, []).append(atom_idx)
        tied = [c for c, members in cells.items() if len(members) > 1]
        if not tied:
            leaves += 1
            if leaves > _MAX_LEAVES:
                raise RuntimeError("canonicalization branch limit exceeded")
            sig = _signature(mol, colors)
            if best_sig is None or sig < best_sig:
                best_sig, best_colors = sig, colors
            continue
        cell_color = min(tied)
        for atom_idx in cells[cell_color]:
            promoted = [
                c if c < cell_color else (cell_color if a == atom_idx else c + 1)
                for a, c in enumerate(colors)
            ]
            stack.append(promoted)

    assert best_colors is not None
    return best_colors


def _needs_bracket(atom: Atom) -> bool:
    if atom.charge != 0 or atom.explicit_h > 0:
        return True
    if atom.aromatic:
        return atom.element.lower() not in AROMATIC_ORGANIC
    return atom.element not in ORGANIC_SUBSET


def _atom_token(atom: Atom) -> str:
    symbol = atom.element.lower() if atom.aromatic else atom.element
    if not _needs_bracket(atom):
        return symbol
    token = "[" + symbol
    if atom.explicit_h == 1:
        token += "H"
    elif atom.explicit_h > 1:
        token += f"H{atom.explicit_h}"
    if atom.charge:
        sign = "+" if atom.charge > 0 else "-"
        token += sign if abs(atom.charge) == 1 else f"{sign}{abs(atom.charge)}"
    return token + "]"


def _bond_token(order: BondOrder, a: Atom, b: Atom) -> str:
    if order == BondOrder.SINGLE:
        # An implicit bond between two aromatic atoms reads back as aromatic,
        # so single bonds there (e.g. biphenyl) must be written out.
        return "-" if (a.aromatic and b.aromatic) else ""
    if order == BondOrder.DOUBLE:
        return "="
    if order == BondOrder.TRIPLE:
        return "#"
    return "" if (a.aromatic and b.aromatic) else ":"


def canonical_smiles(mol: Molecule) -> str:
    """Permutation-invariant SMILES without stereochemistry."""
    n = len(mol.atoms)
    if n == 0:
        return ""
    ranks = canonical_ranks(mol)
    adj: list[list[tuple[int, BondOrder]]] = mol.neighbors()
    for row in adj:
        row.sort(key=lambda pair: ranks[pair[0]])

    # Depth-first spanning forest in rank order. Non-tree edges become ring
    # closures recorded as (open atom, close atom, order) in discovery order.
    visited = [False] * n
    preorder: list[int] = []
    components: list[tuple[int, dict[int, list[tuple[int, BondOrder]]]]] = []
    closure_list: list[tuple[int, int, BondOrder]] = []

    for start in sorted(range(n), key=lambda a: ranks[a]):
        if visited[start]:
            continue
        children: dict[int, list[tuple[int, BondOrder]]] = {start: []}
        used_edges: set[tuple[int, int]] = set()
        visited[start] = True
        preorder.append(start)
        stack = [(start, iter(adj[start]))]
        while stack:
            atom_idx, neighbor_iter = stack[-1]
            advanced = False
            for nbr, order in neighbor_iter:
                key = (atom_idx, nbr) if atom_idx < nbr else (nbr, atom_idx)
                if key in used_edges:
                    continue
                used_edges.add(key)
                if visited[nbr]:
                    closure_list.append((nbr, atom_idx, order))
                else:
                    visited[nbr] = True
                    preorder.append(nbr)
                    children[atom_idx].append((nbr, order))
                    children[nbr] = []
                    stack.append((nbr, iter(adj[nbr])))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
        components.append((start, children))

    # Allocate ring-closure digits in string order; a digit frees up once its
    # closing atom has been rendered.
    opens_at: dict[int, list[int]] = {}
    closes_at: dict[int, list[int]] = {}
    for ci, (a_open, a_close, _) in enumerate(closure_list):
        opens_at.setdefault(a_open, []).append(ci)
        closes_at.setdefault(a_close, []).append(ci)
    digit_for: dict[int, int] = {}
    free_digits = list(range(1, 100))
    heapq.heapify(free_digits)
    for atom_idx in preorder:
        for ci in closes_at.get(atom_idx, ()):
            heapq.heappush(free_digits, digit_for[ci])
        for ci in opens_at.get(atom_idx, ()):
            if not free_digits:
                raise ValueError("more than 99 simultaneously open ring closures")
            digit_for[ci] = heapq.heappop(free_digits)

    def digit_token(digit: int) -> str:
        return str(digit) if digit < 10 else f"%{digit:02d}"

    def closure_tokens(atom_idx: int) -> str:
        parts = []
        for ci in closes_at.get(atom_idx, ()):
            parts.append(digit_token(digit_for[ci]))
        for ci in opens_at.get(atom_idx, ()):
            a_open, a_close, order = closure_list[ci]
            bond = _bond_token(order, mol.atoms[a_open], mol.atoms[a_close])
            parts.append(bond + digit_token(digit_for[ci]))
        return "".join(parts)

    limit = max(n * 4 + 100, 2000)
    old_limit = sys.getrecursionlimit()
    if old_limit < limit:
        sys.setrecursionlimit(limit)
    try:

        def render(atom_idx: int, children) -> str:
            parts = [_atom_token(mol.atoms[atom_idx]) + closure_tokens(atom_idx)]
            kids = children[atom_idx]
            for pos, (child, order) in enumerate(kids):
                bond = _bond_token(order, mol.atoms[atom_idx], mol.atoms[child])
                sub = bond + render(child, children)
                parts.append(f"({sub})" if pos < len(kids) - 1 else sub)
            return "".join(parts)

        pieces = [render(start, children) for start, children in components]
    finally:
        if old_limit < limit:
            sys.setrecursionlimit(old_limit)
    return ".".join(pieces)


def canonical_signature(mol: Molecule) -> tuple:
    """Hashable graph identity: equal exactly for isomorphic labeled graphs."""
    return _signature(mol, canonical_ranks(mol))
