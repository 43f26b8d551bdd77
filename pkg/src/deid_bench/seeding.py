"""Stable keyed RNG streams.

Python's builtin ``hash`` is salted per process, so every deterministic
component derives its random streams from a blake2 digest of a canonical key
string instead. Streams keyed by (seed, *names) are reproducible across
processes and safe to draw from concurrently because each key owns its own
generator.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts: object) -> int:
    """Collapse seed components into a stable 64-bit integer."""
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big")


def stream(*parts: object) -> random.Random:
    """A fresh ``random.Random`` seeded from the given key parts."""
    return random.Random(derive_seed(*parts))
