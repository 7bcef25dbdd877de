"""Configurable bloom filter cascade for join pre-filtering.

A cascade is a sequence of identical-shape stages with stage-distinct hash
seeds; a key passes only if every stage reports membership, so false
positives multiply down while false negatives stay impossible. Probing also
yields the stage-0 hash, which the host join stage reuses instead of
recomputing key hashes in software.

Every bit index uses its own independently seeded 64-bit hash (see
sqf.hashing): index_j = hash(key, seed(stage, j)) mod m. Double hashing
would be cheaper but measurably biases the false-positive rate for small
filters, which the accuracy contract cannot afford.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..hashing import MASK64, SEED_STRIDE, fnv1a64_u64, fnv1a64_u64_many

_HASH_STRIDE = 0xD1B54A32D192ED03  # spacing between per-stage hash functions


def bloom_dims(n_build: float) -> tuple[int, int]:
    """Pinned sizing rule: 8 bits per expected key (floor 64), 2 hashes.

    Proportional sizing keeps the analytic false-positive rate flat as the
    build side grows, which the cost model's monotonicity relies on.
    """
    m = max(64, 8 * math.ceil(max(n_build, 0)))
    return m, 2


def analytic_fp_rate(m: int, k: int, n: float, stages: int) -> float:
    """Per-stage (1 - e^(-kn/m))^k composed over independent stages."""
    if n <= 0:
        return 0.0
    per_stage = (1.0 - math.exp(-k * n / m)) ** k
    return per_stage**stages


@dataclass(frozen=True)
class BloomCascadeConfig:
    stages: int
    bits_per_stage: int
    hashes_per_stage: int
    seed: int

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError("stages must be >= 1")
        if not 1 <= self.hashes_per_stage <= self.bits_per_stage:
            raise ValueError("need bits_per_stage >= hashes_per_stage >= 1")


class BloomCascade:
    """Built filter; immutable after bloom_build."""

    def __init__(self, config: BloomCascadeConfig):
        self.config = config
        nbytes = (config.bits_per_stage + 7) // 8
        self.stage_bits = [np.zeros(nbytes, dtype=np.uint8) for _ in range(config.stages)]
        self.inserted_count = 0

    def hash_seed(self, stage: int, j: int) -> int:
        return (self.config.seed + SEED_STRIDE * (stage + 1) + _HASH_STRIDE * j) & MASK64


def forwarded_hashes(cascade: BloomCascade, keys) -> np.ndarray:
    """Stage-0 hashes for a key array, as forwarded to the host join."""
    arr = np.asarray(list(keys), dtype=np.uint64)
    return fnv1a64_u64_many(arr, cascade.hash_seed(0, 0))


def bloom_build(config: BloomCascadeConfig, keys) -> BloomCascade:
    """Insert every 64-bit key into every stage."""
    cascade = BloomCascade(config)
    key_list = [int(k) & MASK64 for k in keys]
    cascade.inserted_count = len(key_list)
    if not key_list:
        return cascade
    arr = np.array(key_list, dtype=np.uint64)
    m = np.uint64(config.bits_per_stage)
    for stage in range(config.stages):
        bits = cascade.stage_bits[stage]
        for j in range(config.hashes_per_stage):
            idx = fnv1a64_u64_many(arr, cascade.hash_seed(stage, j)) % m
            np.bitwise_or.at(
                bits,
                (idx >> np.uint64(3)).astype(np.int64),
                np.uint8(1) << (idx & np.uint64(7)).astype(np.uint8),
            )
    return cascade


def bloom_probe(cascade: BloomCascade, key: int) -> tuple[bool, int]:
    """(pass, stage-0 hash). Pass is the AND over all stages."""
    key = int(key) & MASK64
    cfg = cascade.config
    hash64 = fnv1a64_u64(key, cascade.hash_seed(0, 0))
    m = cfg.bits_per_stage
    for stage in range(cfg.stages):
        bits = cascade.stage_bits[stage]
        for j in range(cfg.hashes_per_stage):
            idx = fnv1a64_u64(key, cascade.hash_seed(stage, j)) % m
            if not (bits[idx >> 3] >> (idx & 7)) & 1:
                return False, hash64
    return True, hash64


def bloom_probe_many(cascade: BloomCascade, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized probe: (boolean pass mask, stage-0 hashes); agrees with
    bloom_probe bit for bit."""
    arr = np.ascontiguousarray(keys, dtype=np.uint64)
    cfg = cascade.config
    m = np.uint64(cfg.bits_per_stage)
    passed = np.ones(arr.shape, dtype=bool)
    hashes = None
    for stage in range(cfg.stages):
        bits = cascade.stage_bits[stage]
        for j in range(cfg.hashes_per_stage):
            h = fnv1a64_u64_many(arr, cascade.hash_seed(stage, j))
            if stage == 0 and j == 0:
                hashes = h.copy()
            idx = h % m
            byte = bits[(idx >> np.uint64(3)).astype(np.int64)]
            passed &= ((byte >> (idx & np.uint64(7)).astype(np.uint8)) & 1).astype(bool)
    return passed, hashes
