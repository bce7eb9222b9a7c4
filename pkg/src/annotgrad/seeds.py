"""Deterministic seed derivation.

All randomness in a run flows from one master seed. Component seeds are
derived as blake2b("annotgrad", master, *labels) truncated to 32 bits, so
any (master, label path) pair names the same stream on every platform.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *labels: str | int) -> int:
    """Stable 32-bit seed for the component named by ``labels``."""
    h = hashlib.blake2b(digest_size=4)
    h.update(b"annotgrad")
    h.update(str(int(master)).encode("ascii"))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest(), "big")
