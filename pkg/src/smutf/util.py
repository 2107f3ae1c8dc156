"""Small shared helpers: stable hashing, seed derivation, canonical JSON."""

from __future__ import annotations

import hashlib
import json

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes, seed: int = FNV64_OFFSET) -> int:
    """FNV-1a 64-bit hash. Bit-stable across platforms and Python versions."""
    h = seed & _MASK64
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def derive_seed(seed: int, *names: str) -> int:
    """Derive a named sub-stream seed from the top-level seed.

    Every source of randomness in the pipeline draws from one of these
    sub-streams so that components stay independently reproducible.
    """
    payload = ("smutf:%d:" % seed + "/".join(names)).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def stable_json_dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, fixed separators, no NaN."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
