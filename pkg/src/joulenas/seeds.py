"""Deterministic seed derivation so one root seed can drive every subsystem."""

from __future__ import annotations

import hashlib


def derive_seed(root: int, *names: object) -> int:
    """Stable 63-bit seed derived from a root seed and a namespace path."""
    payload = repr((int(root),) + tuple(str(n) for n in names)).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") >> 1
