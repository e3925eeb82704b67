"""Virtual-time network accounting: message sizes, crypto charges, round time."""

import numpy as np
import pytest

from fedsecsim.aggregation import AggregationMode, WeightVector
from fedsecsim.coordinator import RoundPlan
from fedsecsim.simnet import (
    HEADER_BYTES,
    CostModel,
    LinkProfile,
    PayloadKind,
    agg_compute_ms,
    message_bytes,
    node_compute_ms,
    payload_kind_for_mode,
    round_latency,
)

COST = CostModel()


def _plan(participation, mode=AggregationMode.PLAIN):
    ids = tuple(sorted(i for i, f in participation.items() if f == 1))
    w = WeightVector(ids, np.full(len(ids), 1.0 / len(ids)))
    return RoundPlan(w, dict(participation), mode, 0.0, frozenset())


# ---------------------------------------------------------------------------
# message sizes


def test_plain_vector_size_example():
    # 10 doubles + 16-byte header
    assert message_bytes(PayloadKind.PLAIN_VECTOR, dim=10) == 96


def test_cipher_vector_size_example():
    # 512-bit key: ciphertexts live mod n^2 -> 128 bytes each
    assert message_bytes(PayloadKind.CIPHER_VECTOR, dim=10, key_bits=512) == 1296


def test_masked_size_equals_plain_size():
    for d in (1, 7, 100):
        assert message_bytes(PayloadKind.MASKED_VECTOR, d) == message_bytes(
            PayloadKind.PLAIN_VECTOR, d
        )


def test_message_bytes_header_and_validation():
    assert message_bytes(PayloadKind.PLAIN_VECTOR, 1) == 8 + HEADER_BYTES
    with pytest.raises(ValueError):
        message_bytes(PayloadKind.PLAIN_VECTOR, 0)
    with pytest.raises(ValueError):
        message_bytes(PayloadKind.CIPHER_VECTOR, 4, key_bits=0)


def test_cipher_bytes_scale_with_key_size():
    small = message_bytes(PayloadKind.CIPHER_VECTOR, 10, key_bits=128)
    big = message_bytes(PayloadKind.CIPHER_VECTOR, 10, key_bits=512)
    assert small == 32 * 10 + HEADER_BYTES
    assert big > small > message_bytes(PayloadKind.PLAIN_VECTOR, 10)


def test_payload_kind_for_mode():
    assert payload_kind_for_mode(AggregationMode.PLAIN) == PayloadKind.PLAIN_VECTOR
    assert payload_kind_for_mode(AggregationMode.MASKED) == PayloadKind.MASKED_VECTOR
    assert payload_kind_for_mode(AggregationMode.FULL_SMC) == PayloadKind.CIPHER_VECTOR


# ---------------------------------------------------------------------------
# compute charges


def test_node_compute_charges_by_mode():
    # masking pays per element per peer; encryption pays per element
    assert node_compute_ms(AggregationMode.PLAIN, 100, 5, COST) == 0.0
    assert node_compute_ms(AggregationMode.MASKED, 100, 5, COST) == pytest.approx(
        0.001 * 100 * 4
    )
    assert node_compute_ms(AggregationMode.FULL_SMC, 100, 5, COST) == pytest.approx(0.2 * 100)


def test_agg_compute_charges_by_mode():
    assert agg_compute_ms(AggregationMode.PLAIN, 100, 5, COST) == 0.0
    assert agg_compute_ms(AggregationMode.MASKED, 100, 5, COST) == 0.0
    assert agg_compute_ms(AggregationMode.FULL_SMC, 100, 5, COST) == pytest.approx(
        0.01 * 100 * 4 + 0.2 * 100
    )


def test_full_smc_costs_more_than_masked_per_node():
    for p in (2, 5, 20):
        masked = node_compute_ms(AggregationMode.MASKED, 50, p, COST)
        smc = node_compute_ms(AggregationMode.FULL_SMC, 50, p, COST)
        assert smc > masked


def test_single_participant_masking_is_free():
    assert node_compute_ms(AggregationMode.MASKED, 100, 1, COST) == 0.0


def test_cost_model_validation():
    with pytest.raises(ValueError):
        CostModel(encrypt_ms_per_elem=-1.0)
    with pytest.raises(ValueError):
        LinkProfile(base_ms=-1.0)
    with pytest.raises(ValueError):
        LinkProfile(bytes_per_ms=0.0)


# ---------------------------------------------------------------------------
# round latency


def test_one_node_plain_round_example():
    # uplink 10 + 96/1000, downlink the same, no crypto charge
    plan = _plan({0: 1})
    lat = round_latency(
        plan,
        payload_bytes={0: 96},
        reply_bytes=96,
        links={0: LinkProfile()},
        cost=COST,
        dim=10,
        experiment_seed=1,
        round_index=0,
    )
    assert lat.round_ms == pytest.approx(2 * (10.0 + 0.096), abs=1e-12)
    assert lat.agg_ms == 0.0
    assert lat.uplink_ms[0] == pytest.approx(10.096)


def test_non_participants_add_nothing():
    plan = _plan({0: 1, 1: 0})
    lat = round_latency(
        plan, {0: 96}, 96, {0: LinkProfile()}, COST, 10, 1, 0
    )
    assert 1 not in lat.uplink_ms
    assert lat.round_ms == pytest.approx(2 * 10.096)


def test_slowest_participant_sets_the_barrier():
    plan = _plan({0: 1, 1: 1})
    links = {0: LinkProfile(base_ms=10.0), 1: LinkProfile(base_ms=50.0)}
    lat = round_latency(plan, {0: 96, 1: 96}, 96, links, COST, 10, 1, 0)
    assert lat.round_ms == pytest.approx(2 * (50.0 + 0.096), abs=1e-12)


def test_full_smc_round_costs_more_than_plain():
    links = {i: LinkProfile() for i in range(4)}
    payload_plain = {i: message_bytes(PayloadKind.PLAIN_VECTOR, 50) for i in range(4)}
    payload_smc = {i: message_bytes(PayloadKind.CIPHER_VECTOR, 50, key_bits=512) for i in range(4)}
    part = {i: 1 for i in range(4)}
    plain = round_latency(_plan(part), payload_plain, 416, links, COST, 50, 1, 0)
    smc = round_latency(
        _plan(part, AggregationMode.FULL_SMC), payload_smc, 416, links, COST, 50, 1, 0
    )
    assert smc.round_ms > plain.round_ms
    assert smc.agg_ms > 0.0


def test_missing_link_profile_raises():
    with pytest.raises(ValueError, match="no link profile"):
        round_latency(_plan({0: 1, 1: 1}), {0: 96, 1: 96}, 96, {0: LinkProfile()}, COST, 10, 1, 0)


def test_jitter_replays_bitwise_and_respects_bounds():
    plan = _plan({0: 1, 1: 1})
    links = {0: LinkProfile(jitter_ms=5.0), 1: LinkProfile(jitter_ms=5.0)}
    payload = {0: 96, 1: 96}
    a = round_latency(plan, payload, 96, links, COST, 10, 42, 3)
    b = round_latency(plan, payload, 96, links, COST, 10, 42, 3)
    assert a == b
    c = round_latency(plan, payload, 96, links, COST, 10, 42, 4)
    assert a != c  # round index feeds the jitter stream
    for nid in (0, 1):
        assert 10.096 <= a.uplink_ms[nid] <= 10.096 + 5.0
        assert 10.096 <= a.downlink_ms[nid] <= 10.096 + 5.0


def test_zero_jitter_skips_the_stream():
    plan = _plan({0: 1})
    a = round_latency(plan, {0: 96}, 96, {0: LinkProfile()}, COST, 10, 1, 0)
    b = round_latency(plan, {0: 96}, 96, {0: LinkProfile()}, COST, 10, 2, 9)
    assert a.round_ms == b.round_ms  # no jitter, no seed dependence
