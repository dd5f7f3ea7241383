"""Canonical JSON, stable digests, seed derivation, array freezing."""

from __future__ import annotations

import hashlib
import json

import numpy as np


def frozen_array(arr, dtype=None) -> np.ndarray:
    """Read-only contiguous view-or-copy that never mutates the caller's array."""
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out is arr and arr.flags.writeable:
        out = arr.copy()
    out.setflags(write=False)
    return out


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def stable_digest(*parts: bytes | str) -> str:
    """Hex blake2b digest over the given byte/str parts, order-sensitive."""
    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        if isinstance(p, str):
            p = p.encode("utf-8")
        h.update(len(p).to_bytes(8, "little"))
        h.update(p)
    return h.hexdigest()


def derive_seed(*parts) -> int:
    """Deterministic 64-bit seed from arbitrary JSON-serializable parts."""
    h = hashlib.blake2b(canonical_json(list(parts)).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")
