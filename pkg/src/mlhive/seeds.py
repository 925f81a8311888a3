"""Deterministic seed derivation.

Python's builtin hash() is salted per process, so replayable seeds are derived
from SHA-256 over canonical text parts instead.
"""

from __future__ import annotations

import hashlib

__all__ = ["stable_hash", "MAX_SEED"]

MAX_SEED = 2**64 - 1


def stable_hash(*parts: object) -> int:
    """Collapse the parts into a 64-bit unsigned seed, stable across runs."""
    digest = hashlib.sha256()
    for part in parts:
        digest.update(str(part).encode("utf-8"))
        digest.update(b"\x1f")
    return int.from_bytes(digest.digest()[:8], "big")
