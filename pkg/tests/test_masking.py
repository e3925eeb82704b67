"""Pairwise masking: exact cancellation, share hiding, input validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsecsim.masking import (
    MaskSeeds,
    _encode_ring,
    fixed_point_sum,
    masked_share,
    masked_sum,
)
from fedsecsim.paillier import EncodingError, FixedPointEncoding
from fedsecsim.rng import np_rng

ENC = FixedPointEncoding()


def test_two_node_cancellation_identity():
    seeds = MaskSeeds(1, 0)
    total = masked_sum([np.array([1.0, 1.0]), np.array([2.0, 2.0])], seeds, ENC)
    assert (total == np.array([3.0, 3.0])).all()


def test_masked_sum_matches_fixed_point_oracle_bitwise():
    rng = np_rng("mask", 0)
    updates = [rng.uniform(-5, 5, size=8) for _ in range(5)]
    seeds = MaskSeeds(7, 3)
    got = masked_sum(updates, seeds, ENC)
    want = fixed_point_sum(updates, ENC)
    assert (got == want).all()


def test_share_differs_from_plaintext():
    seeds = MaskSeeds(1, 0)
    u = np.array([1.0, 2.0, 3.0])
    share = masked_share(u, 0, [0, 1], seeds, ENC)
    assert not (share == _encode_ring(u, ENC)).all()


def test_masked_sum_refuses_single_node():
    with pytest.raises(ValueError):
        masked_sum([np.array([1.0])], MaskSeeds(1, 0), ENC)


def test_masked_sum_rejects_mismatched_dims_and_ids():
    seeds = MaskSeeds(1, 0)
    with pytest.raises(ValueError):
        masked_sum([np.ones(2), np.ones(3)], seeds, ENC)
    with pytest.raises(ValueError):
        masked_sum([np.ones(2), np.ones(2)], seeds, ENC, node_ids=[1, 1])
    with pytest.raises(ValueError):
        masked_sum([np.ones(2), np.ones(2)], seeds, ENC, node_ids=[1])


def test_pair_mask_requires_ordered_pair():
    with pytest.raises(ValueError):
        MaskSeeds(1, 0).pair_mask(2, 1, 4)


def test_pair_mask_deterministic_per_round():
    a = MaskSeeds(1, 0).pair_mask(0, 1, 4)
    b = MaskSeeds(1, 0).pair_mask(0, 1, 4)
    c = MaskSeeds(1, 1).pair_mask(0, 1, 4)
    assert (a == b).all()
    assert not (a == c).all()


def test_encode_ring_rejects_overflow():
    with pytest.raises(EncodingError, match="coordinate 1"):
        _encode_ring(np.array([0.0, 100.0]), ENC)


def test_cancellation_across_cohort_sizes():
    # the masking invariant: equality with the unmasked fixed-point sum,
    # exactly, for every cohort size 2..8
    rng = np_rng("cohort", 0)
    for n in range(2, 9):
        for trial in range(10):
            updates = [rng.uniform(-8, 8, size=6) for _ in range(n)]
            seeds = MaskSeeds(trial, n)
            assert (masked_sum(updates, seeds, ENC) == fixed_point_sum(updates, ENC)).all()


def test_result_close_to_float_sum():
    rng = np_rng("float", 0)
    updates = [rng.uniform(-3, 3, size=10) for _ in range(6)]
    got = masked_sum(updates, MaskSeeds(2, 5), ENC)
    want = np.sum(updates, axis=0)
    assert np.max(np.abs(got - want)) <= 6 * 2.0 ** -24


def test_masked_sum_respects_node_id_keying():
    # same updates under different node ids still cancel to the same total
    rng = np_rng("ids", 0)
    updates = [rng.uniform(-1, 1, size=4) for _ in range(3)]
    a = masked_sum(updates, MaskSeeds(1, 0), ENC, node_ids=[0, 1, 2])
    b = masked_sum(updates, MaskSeeds(1, 0), ENC, node_ids=[5, 9, 11])
    assert (a == b).all()


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=6),
    dim=st.integers(min_value=1, max_value=12),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_cancellation_property(n, dim, seed):
    rng = np_rng("hyp-mask", seed)
    updates = [rng.uniform(-10, 10, size=dim) for _ in range(n)]
    seeds = MaskSeeds(seed, 0)
    assert (masked_sum(updates, seeds, ENC) == fixed_point_sum(updates, ENC)).all()
