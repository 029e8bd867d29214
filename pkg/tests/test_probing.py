import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condsum.probing import (
    BlockDecomposition,
    CapacityError,
    HashSequence,
    block_decomposition,
    insert_trace,
    total_displacement,
    totals_from_counts,
)

WORKED = HashSequence(m=10, addresses=(6, 9, 1, 9, 9, 6, 2, 5))


def counts_of(seq: HashSequence) -> np.ndarray:
    c = np.zeros(seq.m, dtype=np.int64)
    for h in seq.addresses:
        c[h - 1] += 1
    return c


class TestWorkedExample:
    def test_per_ball_displacements(self):
        trace = insert_trace(WORKED)
        assert trace.displacements == (0, 0, 0, 1, 3, 1, 1, 0)
        assert trace.total == 6

    def test_block_lengths_and_membership(self):
        blocks = block_decomposition(WORKED)
        assert blocks.lengths == (6, 4)
        trace = insert_trace(WORKED)
        assert set(trace.positions) == {9, 10, 1, 2, 3, 5, 6, 7}

    def test_block_disp_sums(self):
        # recompute the attribution by final position: balls ending in
        # {9,10,1,2,3} carry 0+1+3+0+1 = 5, balls in {5,6,7} carry 1
        blocks = block_decomposition(WORKED)
        assert blocks.disp_sums == (5, 1)
        assert sum(blocks.disp_sums) == 6


class TestTotalDisplacement:
    def test_permutation_of_worked_example(self):
        perm = HashSequence(m=10, addresses=(5, 2, 6, 9, 9, 1, 6, 9))
        assert total_displacement(perm) == 6

    def test_single_ball(self):
        assert total_displacement(HashSequence(m=2, addresses=(1,))) == 0

    def test_distinct_addresses_never_collide(self):
        assert total_displacement(HashSequence(m=4, addresses=(1, 2, 3))) == 0

    def test_single_address_pile_up_attains_maximum(self):
        seq = HashSequence(m=5, addresses=(1, 1, 1, 1))
        assert total_displacement(seq) == 4 * 3 // 2

    def test_thousand_random_permutations(self):
        rng = np.random.default_rng(20240517)
        for _ in range(1000):
            m = int(rng.integers(1, 25))
            n = int(rng.integers(0, m + 1))
            addresses = tuple(int(a) for a in rng.integers(1, m + 1, size=n))
            seq = HashSequence(m=m, addresses=addresses)
            shuffled = tuple(rng.permutation(addresses).tolist())
            assert total_displacement(seq) == total_displacement(
                HashSequence(m=m, addresses=shuffled)
            )


class TestBlocks:
    def test_isolated_empty_urns_are_unit_blocks(self):
        blocks = block_decomposition(HashSequence(m=3, addresses=(1,)))
        assert blocks.lengths == (2, 1)
        assert blocks.disp_sums == (0, 0)

    def test_full_table_has_no_decomposition(self):
        with pytest.raises(ValueError):
            block_decomposition(HashSequence(m=3, addresses=(1, 2, 3)))

    def test_empty_sequence(self):
        blocks = block_decomposition(HashSequence(m=4, addresses=()))
        assert blocks.lengths == (1, 1, 1, 1)


class TestValidation:
    def test_address_out_of_range(self):
        with pytest.raises(ValueError):
            HashSequence(m=5, addresses=(0,))
        with pytest.raises(ValueError):
            HashSequence(m=5, addresses=(6,))

    def test_overfull_table(self):
        with pytest.raises(CapacityError):
            HashSequence(m=2, addresses=(1, 1, 2))


def check_invariants(seq: HashSequence):
    trace = insert_trace(seq)
    n = seq.n
    assert trace.total == sum(trace.displacements)
    assert 0 <= trace.total <= n * (n - 1) // 2
    assert len(trace.occupied) == n
    # the crossing-count identity must agree with the simulation
    if n < seq.m:
        assert int(totals_from_counts(counts_of(seq))) == trace.total
        blocks = block_decomposition(seq)
        assert len(blocks.blocks) == seq.m - n
        assert sum(blocks.lengths) == seq.m
        assert sum(blocks.disp_sums) == trace.total


def test_exhaustive_small_tables():
    for m in range(1, 6):
        for n in range(0, m + 1):
            for addresses in itertools.product(range(1, m + 1), repeat=n):
                check_invariants(HashSequence(m=m, addresses=addresses))


@settings(max_examples=300, deadline=None)
@given(data=st.data())
def test_random_sequences_keep_invariants(data):
    m = data.draw(st.integers(min_value=1, max_value=14))
    n = data.draw(st.integers(min_value=0, max_value=m))
    addresses = tuple(
        data.draw(st.lists(st.integers(1, m), min_size=n, max_size=n))
    )
    check_invariants(HashSequence(m=m, addresses=addresses))


def test_totals_from_counts_batch_shape():
    c = np.array([[1, 1, 0, 0], [2, 0, 0, 0], [0, 0, 0, 0]])
    out = totals_from_counts(c)
    assert out.tolist() == [0, 1, 0]
