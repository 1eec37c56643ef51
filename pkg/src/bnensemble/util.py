"""Shared helpers: deterministic seed derivation and canonical JSON."""

from __future__ import annotations

import hashlib
import json


def derive_seed(seed: int, *tokens) -> int:
    """Derive a child seed from a parent seed and a token path.

    Uses blake2b so the derivation is stable across processes and platforms
    (Python's builtin ``hash`` is salted per process and must not be used).
    Parallel workers given the same (seed, tokens) always see the same stream.
    """
    key = ":".join([str(int(seed))] + [str(t) for t in tokens])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1  # non-negative, fits in 63 bits


def canonical_json(obj) -> str:
    """Serialize with sorted keys and stable float formatting.

    ``json`` renders floats via ``repr`` (shortest round-trip), so identical
    inputs always produce byte-identical text.
    """
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)


def config_digest(obj) -> str:
    """Hex digest identifying an effective configuration."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]
