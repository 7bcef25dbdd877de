"""Seeded 64-bit hashing used for bloom filters, join keys, and row checksums.

The function is an FNV-1a variant: the 8 little-endian bytes of a seed word
are absorbed before the payload, and the raw FNV state is passed through a
final avalanche mix (raw FNV-1a has weak low bits, which matters when bit
indices are taken modulo a power of two). The exact byte-level definition
lives in docs/hashing.md; scalar and vectorized paths must agree bit for bit
and are tested against each other.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
SEED_STRIDE = 0x9E3779B97F4A7C15  # per-stage seed spacing

_MIX_C1 = 0xFF51AFD7ED558CCD
_MIX_C2 = 0xC4CEB9FE1A85EC53

# Fixed internal seeds (documented in docs/hashing.md).
CHECKSUM_SEED = 0x5143_4845_434B_0001  # row checksum folding
KEY_IMAGE_SEED = 0x4B45_5949_4D47_0001  # CHAR join keys -> 64-bit image


def mix64(h: int) -> int:
    h ^= h >> 33
    h = (h * _MIX_C1) & MASK64
    h ^= h >> 33
    h = (h * _MIX_C2) & MASK64
    h ^= h >> 33
    return h


def fnv1a64(data: bytes, seed: int = 0) -> int:
    """Hash `data` under `seed`; the result is a uniform 64-bit value."""
    h = FNV_OFFSET
    for b in (seed & MASK64).to_bytes(8, "little"):
        h = ((h ^ b) * FNV_PRIME) & MASK64
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return mix64(h)


def fnv1a64_u64(key: int, seed: int = 0) -> int:
    """Hash one unsigned 64-bit key (its 8 little-endian bytes)."""
    return fnv1a64((key & MASK64).to_bytes(8, "little"), seed)


def fnv1a64_u64_many(keys: np.ndarray, seed: int = 0) -> np.ndarray:
    """Vectorized fnv1a64_u64 over a uint64 array."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    h = np.full(keys.shape, FNV_OFFSET, dtype=np.uint64)
    prime = np.uint64(FNV_PRIME)
    for b in (seed & MASK64).to_bytes(8, "little"):
        h = (h ^ np.uint64(b)) * prime
    for i in range(8):
        byte = (keys >> np.uint64(8 * i)) & np.uint64(0xFF)
        h = (h ^ byte) * prime
    h ^= h >> np.uint64(33)
    h *= np.uint64(_MIX_C1)
    h ^= h >> np.uint64(33)
    h *= np.uint64(_MIX_C2)
    h ^= h >> np.uint64(33)
    return h


def fold_checksum(hashes) -> int:
    """Order-insensitive 64-bit fold: sum of row hashes modulo 2^64."""
    total = 0
    for h in hashes:
        total = (total + int(h)) & MASK64
    return total
