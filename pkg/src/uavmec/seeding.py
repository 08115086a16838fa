"""Deterministic derivation of child seeds from a master seed.

Every random stream in a run is seeded through ``derive`` so that results
depend only on the master seed and the logical identity of the stream
(purpose tag plus indices), never on scheduling or iteration order.
"""

from __future__ import annotations

import hashlib


def derive(master: int, *parts: int | str) -> int:
    """Return a 64-bit child seed for (master, parts).

    The child is the first 8 bytes (little-endian) of the BLAKE2b digest of
    the decimal master seed and the string-encoded parts joined by '|'.
    """
    tokens = [str(int(master))]
    for part in parts:
        tokens.append(str(part))
    digest = hashlib.blake2b("|".join(tokens).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
