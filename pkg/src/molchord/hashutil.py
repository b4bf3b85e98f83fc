"""Stable hashing shared across modules.

Python's builtin ``hash`` is salted per process, so everything that must be
reproducible (fingerprint bits, featurizer seeds, validation splits, cache
keys) goes through blake2b here.
"""

from __future__ import annotations

import hashlib


def stable_hash64(*parts: int | str | bytes) -> int:
    """64-bit digest of a heterogeneous tuple, stable across runs and platforms."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, bool):  # bool is an int subclass; keep it distinct
            data = b"?" + bytes([part])
        elif isinstance(part, int):
            data = b"i" + part.to_bytes(16, "little", signed=True)
        elif isinstance(part, str):
            raw = part.encode("utf-8")
            data = b"s" + len(raw).to_bytes(4, "little") + raw
        elif isinstance(part, bytes):
            data = b"b" + len(part).to_bytes(4, "little") + part
        else:
            raise TypeError(f"unhashable part type: {type(part).__name__}")
        h.update(data)
    return int.from_bytes(h.digest(), "little")


def derive_seed(*parts: int | str | bytes) -> int:
    """Seed for a numpy Generator derived from arbitrary labels."""
    return stable_hash64(*parts)
