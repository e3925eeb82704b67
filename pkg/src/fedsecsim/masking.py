"""Lightweight pairwise-masking aggregation (the cheap fallback to Paillier).

Updates are fixed-point encoded into the ring of integers mod 2^64; each
ordered node pair (i, j), i < j, shares a seeded mask vector that i adds
and j subtracts. Ring arithmetic is associative, so masks cancel exactly
and the server recovers the precise fixed-point sum without seeing any
individual update.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .paillier import EncodingError, FixedPointEncoding
from .rng import np_rng

_U64_MAX = np.iinfo(np.uint64).max


@dataclass(frozen=True)
class MaskSeeds:
    """Derives the shared pair masks from (experiment seed, round, i, j)."""

    experiment_seed: int
    round_index: int

    def pair_mask(self, i: int, j: int, dim: int) -> np.ndarray:
        if i >= j:
            raise ValueError("pair masks are keyed by i < j")
        rng = np_rng("pair-mask", self.experiment_seed, self.round_index, i, j)
        return rng.integers(0, _U64_MAX, size=dim, dtype=np.uint64, endpoint=True)


def _encode_ring(v: np.ndarray, enc: FixedPointEncoding) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if np.any(~np.isfinite(v)) or np.any(np.abs(v) > enc.clamp_abs):
        bad = int(np.argmax(~np.isfinite(v) | (np.abs(v) > enc.clamp_abs)))
        raise EncodingError(f"coordinate {bad}: value {v[bad]} exceeds clamp_abs {enc.clamp_abs}")
    q = np.rint(v * enc.scale).astype(np.int64)
    return q.astype(np.uint64)  # two's-complement wrap embeds signed values in the ring


def _decode_ring(total: np.ndarray, enc: FixedPointEncoding) -> np.ndarray:
    signed = total.view(np.int64)  # reinterpret: sums stay far below 2^63
    return signed.astype(np.float64) / enc.scale


def masked_share(
    update: np.ndarray,
    node_id: int,
    participant_ids: Sequence[int],
    seeds: MaskSeeds,
    enc: FixedPointEncoding,
) -> np.ndarray:
    """What one node transmits: its encoded update plus all pair masks."""
    ids = sorted(participant_ids)
    if node_id not in ids:
        raise ValueError(f"node {node_id} not among participants {ids}")
    if len(ids) < 2:
        raise ValueError("masking needs at least two participants")
    share = _encode_ring(update, enc)
    dim = share.shape[0]
    for other in ids:
        if other == node_id:
            continue
        lo, hi = min(node_id, other), max(node_id, other)
        mask = seeds.pair_mask(lo, hi, dim)
        if node_id == lo:
            share = share + mask
        else:
            share = share - mask
    return share


def sum_shares(shares: Sequence[np.ndarray], enc: FixedPointEncoding) -> np.ndarray:
    """Server side: ring-sum the shares and decode the exact fixed-point total."""
    total = np.zeros_like(shares[0])
    for s in shares:
        total = total + s
    return _decode_ring(total, enc)


def fixed_point_sum(updates: Sequence[np.ndarray], enc: FixedPointEncoding) -> np.ndarray:
    """Unmasked sum through the same representation (the masking oracle)."""
    total = np.zeros_like(_encode_ring(updates[0], enc))
    for u in updates:
        total = total + _encode_ring(u, enc)
    return _decode_ring(total, enc)


def masked_sum(
    updates: Sequence[np.ndarray],
    seeds: MaskSeeds,
    enc: FixedPointEncoding,
    node_ids: Sequence[int] | None = None,
) -> np.ndarray:
    """Aggregate per-node updates so only their sum is ever visible.

    Refuses a single node (its share would be unmaskable) and mismatched
    dimensions. The result equals :func:`fixed_point_sum` bitwise.
    """
    if len(updates) < 2:
        raise ValueError("masked aggregation needs at least two nodes")
    ids = list(node_ids) if node_ids is not None else list(range(len(updates)))
    if len(ids) != len(updates) or len(set(ids)) != len(ids):
        raise ValueError("node_ids must be unique and match the update count")
    dims = {np.asarray(u).shape for u in updates}
    if len(dims) != 1 or next(iter(dims)) != (np.asarray(updates[0]).shape[0],):
        raise ValueError("all updates must share one 1-D shape")
    shares = [
        masked_share(u, i, ids, seeds, enc)
        for i, u in sorted(zip(ids, updates), key=lambda t: t[0])
    ]
    return sum_shares(shares, enc)
