"""Aggregation rules: plain averaging, weighted combination, and the
encrypted-space weighted sum.

Summation order is canonicalized by ascending node id before floating
accumulation so results are bitwise reproducible under permutation of the
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import paillier
from .paillier import CipherVector, FixedPointEncoding, KeyPair

WEIGHT_BITS = 16  # encrypted-space weights are quantized to 16-bit fixed point


class AggregationMode(str, Enum):
    PLAIN = "plain"
    MASKED = "masked"
    FULL_SMC = "full_smc"


@dataclass(frozen=True)
class WeightVector:
    """Per-node convex weights; insertion order pairs with the update list."""

    node_ids: tuple[int, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if len(self.node_ids) != w.shape[0] or w.shape[0] == 0:
            raise ValueError("weights and node_ids must be non-empty and equal length")
        if len(set(self.node_ids)) != len(self.node_ids):
            raise ValueError("node_ids must be unique")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1 (got {w.sum()!r})")

    @classmethod
    def uniform(cls, node_ids: Sequence[int]) -> "WeightVector":
        n = len(node_ids)
        return cls(tuple(node_ids), np.full(n, 1.0 / n))


def fedavg(updates: Sequence[np.ndarray]) -> np.ndarray:
    """Unweighted mean of the updates (the plain baseline rule)."""
    if len(updates) == 0:
        raise ValueError("fedavg needs at least one update")
    stack = np.stack([np.asarray(u, dtype=np.float64) for u in updates])
    return stack.sum(axis=0) / len(updates)


def _canonical_order(updates: Sequence[np.ndarray], w: WeightVector):
    if len(updates) != len(w.node_ids):
        raise ValueError(
            f"{len(updates)} updates but {len(w.node_ids)} weights"
        )
    order = np.argsort(np.asarray(w.node_ids, dtype=np.int64), kind="stable")
    return [(updates[k], float(w.weights[k])) for k in order]


def weighted_aggregate(updates: Sequence[np.ndarray], w: WeightVector) -> np.ndarray:
    """Convex combination sum_i w_i * update_i, accumulated in node-id order."""
    pairs = _canonical_order(updates, w)
    acc = np.zeros_like(np.asarray(pairs[0][0], dtype=np.float64))
    for u, wi in pairs:
        acc = acc + wi * np.asarray(u, dtype=np.float64)
    return acc


def quantize_weights(w: WeightVector) -> list[int]:
    """Non-negative integer weights at 2^WEIGHT_BITS scale for scalar_mul."""
    return [int(round(float(wi) * (1 << WEIGHT_BITS))) for wi in w.weights]


def secure_weighted_aggregate(
    cipher_updates: Sequence[CipherVector],
    w: WeightVector,
    keys: KeyPair,
    enc: FixedPointEncoding,
) -> np.ndarray:
    """Weighted aggregation computed entirely on ciphertexts.

    Matches :func:`weighted_aggregate` of the decrypted updates within
    N * 2^-WEIGHT_BITS * max|update| + N * 2^-scale_bits per coordinate.
    """
    pairs = _canonical_order(cipher_updates, w)
    dim = pairs[0][0].dim
    if any(cv.dim != dim for cv, _ in pairs):
        raise ValueError("cipher vectors must share one dimension")
    pk = keys.public
    paillier.check_no_wraparound(len(pairs), enc, pk, weight_bits=WEIGHT_BITS)
    ks = [int(round(wi * (1 << WEIGHT_BITS))) for _, wi in pairs]
    acc = [1] * dim  # ciphertext of zero (r = 1): multiplicative identity
    for (cv, _), k in zip(pairs, ks):
        for d in range(dim):
            acc[d] = paillier.add_ciphertexts(pk, acc[d], paillier.scalar_mul(pk, cv.entries[d], k))
    residues = [paillier.decrypt(keys, c) for c in acc]
    return paillier.decode_vector(residues, enc, pk, extra_scale_bits=WEIGHT_BITS)
