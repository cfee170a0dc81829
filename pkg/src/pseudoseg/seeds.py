"""Deterministic seed derivation.

Every stochastic stage takes an explicit 64-bit seed; batch drivers derive
per-item seeds from (global seed, item identity) so output never depends on
worker count or processing order.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def derive_seed(*parts: int | str) -> int:
    """Stable 64-bit seed from a sequence of ints and strings.

    Uses blake2b, so the mapping is identical across processes and runs
    (unlike builtin ``hash``).
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step. Returns (output value, next state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64, state
