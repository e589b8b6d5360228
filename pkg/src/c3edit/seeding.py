"""Deterministic seed derivation.

Every stochastic step in a session draws its seed from the session seed plus
a label path, so reruns and resumed runs consume identical noise without any
shared global RNG state.
"""

import hashlib


def derive_seed(base: int, *parts: object) -> int:
    """Stable 63-bit seed from a base seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(base)).encode())
    for part in parts:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF
