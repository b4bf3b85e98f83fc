"""Circular (Morgan-style) fingerprints and Tanimoto similarity."""

from __future__ import annotations

from dataclasses import dataclass

from ..hashutil import stable_hash64
from .model import Molecule

DEFAULT_RADIUS = 2
DEFAULT_NBITS = 2048


class WidthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Fingerprint:
    bits: int  # bitset packed into a Python int
    nbits: int = DEFAULT_NBITS
    radius: int = DEFAULT_RADIUS

    @property
    def popcount(self) -> int:
        return self.bits.bit_count()

    def on_bits(self) -> tuple[int, ...]:
        out, bits, base = [], self.bits, 0
        while bits:
            chunk = bits & 0xFFFFFFFFFFFFFFFF
            for offset in range(64):
                if chunk >> offset & 1:
                    out.append(base + offset)
            bits >>= 64
            base += 64
        return tuple(out)


def fingerprint_from_bits(on: set[int] | tuple[int, ...], nbits: int = DEFAULT_NBITS) -> Fingerprint:
    value = 0
    for bit in on:
        if not 0 <= bit < nbits:
            raise ValueError(f"bit {bit} outside width {nbits}")
        value |= 1 << bit
    return Fingerprint(bits=value, nbits=nbits, radius=0)


def morgan_fingerprint(
    mol: Molecule, radius: int = DEFAULT_RADIUS, nbits: int = DEFAULT_NBITS
) -> Fingerprint:
    """Hash every atom's r-neighborhood invariant for r = 0..radius into bits.

    Atom invariants are built from the atom label plus degree and refined by
    the sorted multiset of (bond order, neighbor invariant) pairs, so the
    result only depends on the graph, never on atom input order.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if nbits < 64 or nbits & (nbits - 1):
        raise ValueError("nbits must be a power of two >= 64")

    adj = mol.neighbors()
    invariants = [
        stable_hash64(
            "atom", a.element, a.aromatic, a.charge, a.explicit_h, len(adj[a.index])
        )
        for a in mol.atoms
    ]
    bits = 0
    for inv in invariants:
        bits |= 1 << (inv % nbits)
    for r in range(1, radius + 1):
        refreshed = []
        for atom in mol.atoms:
            env = sorted((int(order), invariants[nbr]) for nbr, order in adj[atom.index])
            parts: list[int | str] = ["env", r, invariants[atom.index]]
            for order, nbr_inv in env:
                parts.extend((order, nbr_inv))
            refreshed.append(stable_hash64(*parts))
        invariants = refreshed
        for inv in invariants:
            bits |= 1 << (inv % nbits)
    return Fingerprint(bits=bits, nbits=nbits, radius=radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|A and B| / |A or B| over set bits; two empty fingerprints count as equal."""
    if a.nbits != b.nbits:
        raise WidthMismatch(f"fingerprint widths differ: {a.nbits} != {b.nbits}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union
