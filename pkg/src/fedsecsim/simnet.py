"""Deterministic virtual-time accounting for round communication and crypto cost.

No real networking happens; every message is charged milliseconds from its
byte size, the node's link parameters, and a per-element compute model, so
latency comparisons are reproducible instead of machine-dependent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .aggregation import AggregationMode
from .coordinator import RoundPlan
from .rng import np_rng

HEADER_BYTES = 16


class PayloadKind(str, Enum):
    PLAIN_VECTOR = "plain_vector"
    MASKED_VECTOR = "masked_vector"
    CIPHER_VECTOR = "cipher_vector"


@dataclass(frozen=True)
class LinkProfile:
    base_ms: float = 10.0
    bytes_per_ms: float = 1000.0
    jitter_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.base_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency parameters must be >= 0")
        if self.bytes_per_ms <= 0:
            raise ValueError("bytes_per_ms must be > 0")


@dataclass(frozen=True)
class CostModel:
    """Virtual milliseconds charged per vector element.

    Defaults come from a local microbenchmark of the 512-bit crypto
    primitives (see the bench-crypto CLI command); full encryption must
    stay strictly costlier per element than pairwise masking.
    """

    encrypt_ms_per_elem: float = 0.2
    decrypt_ms_per_elem: float = 0.2
    homadd_ms_per_elem: float = 0.01
    mask_ms_per_elem: float = 0.001

    def __post_init__(self) -> None:
        for name in ("encrypt_ms_per_elem", "decrypt_ms_per_elem", "homadd_ms_per_elem", "mask_ms_per_elem"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class RoundLatency:
    round_ms: float
    agg_ms: float
    uplink_ms: dict[int, float]
    compute_ms: dict[int, float]
    downlink_ms: dict[int, float]


def message_bytes(kind: PayloadKind, dim: int, key_bits: int = 0) -> int:
    """Serialized size: 8 bytes per plain/masked element, ceil(2*key_bits/8) per ciphertext."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if kind == PayloadKind.CIPHER_VECTOR:
        if key_bits < 1:
            raise ValueError("cipher payloads need key_bits >= 1")
        return math.ceil(2 * key_bits / 8) * dim + HEADER_BYTES
    return 8 * dim + HEADER_BYTES


def node_compute_ms(mode: AggregationMode, dim: int, num_participants: int, cost: CostModel) -> float:
    """Per-participant crypto charge; masking pays per peer, encryption per element."""
    if mode == AggregationMode.MASKED:
        return cost.mask_ms_per_elem * dim * max(num_participants - 1, 0)
    if mode == AggregationMode.FULL_SMC:
        return cost.encrypt_ms_per_elem * dim
    return 0.0


def agg_compute_ms(mode: AggregationMode, dim: int, num_participants: int, cost: CostModel) -> float:
    """Server-side charge: homomorphic accumulation plus one decryption pass."""
    if mode == AggregationMode.FULL_SMC:
        adds = cost.homadd_ms_per_elem * dim * max(num_participants - 1, 0)
        return adds + cost.decrypt_ms_per_elem * dim
    return 0.0


def _transfer_ms(link: LinkProfile, nbytes: int, jitter: float) -> float:
    return link.base_ms + nbytes / link.bytes_per_ms + jitter


def round_latency(
    plan: RoundPlan,
    payload_bytes: Mapping[int, int],
    reply_bytes: int,
    links: Mapping[int, LinkProfile],
    cost: CostModel,
    dim: int,
    experiment_seed: int,
    round_index: int,
) -> RoundLatency:
    """Synchronous-barrier round time.

    round_ms = max over participants of (uplink + node compute)
             + aggregation compute
             + max over participants of downlink.
    Non-participants send nothing and add zero latency. Jitter draws are
    keyed by (seed, round, node, direction) so traces replay bitwise.
    """
    participants = sorted(nid for nid, f in plan.participation.items() if f == 1)
    uplink: dict[int, float] = {}
    compute: dict[int, float] = {}
    downlink: dict[int, float] = {}
    for nid in participants:
        if nid not in links:
            raise ValueError(f"node {nid} has no link profile")
        link = links[nid]
        if link.jitter_ms > 0:
            rng = np_rng("link-jitter", experiment_seed, round_index, nid)
            j_up = float(rng.uniform(0.0, link.jitter_ms))
            j_down = float(rng.uniform(0.0, link.jitter_ms))
        else:
            j_up = j_down = 0.0
        uplink[nid] = _transfer_ms(link, int(payload_bytes[nid]), j_up)
        compute[nid] = node_compute_ms(plan.mode, dim, len(participants), cost)
        downlink[nid] = _transfer_ms(link, reply_bytes, j_down)
    agg_ms = agg_compute_ms(plan.mode, dim, len(participants), cost)
    up_phase = max((uplink[n] + compute[n] for n in participants), default=0.0)
    down_phase = max((downlink[n] for n in participants), default=0.0)
    return RoundLatency(
        round_ms=up_phase + agg_ms + down_phase,
        agg_ms=agg_ms,
        uplink_ms=uplink,
        compute_ms=compute,
        downlink_ms=downlink,
    )


def payload_kind_for_mode(mode: AggregationMode) -> PayloadKind:
    if mode == AggregationMode.FULL_SMC:
        return PayloadKind.CIPHER_VECTOR
    if mode == AggregationMode.MASKED:
        return PayloadKind.MASKED_VECTOR
    return PayloadKind.PLAIN_VECTOR
