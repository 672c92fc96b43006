"""Sparse schedules, the block decomposition and the iteration budgets."""

import numpy as np
import pytest

from mpcmm import (
    EpsilonSchedule,
    SparseMatrix,
    assert_transcript,
    decompose,
    default_mask,
    get_semiring,
    iteration_budget,
    naive_multiply,
    schedule_sparse_trivial,
    schedule_sparse_twophase,
)
from mpcmm.instances import block_diagonal, random_d_sparse
from mpcmm.schedules.sparse import build_ledger

INT = get_semiring("int")
BOOL = get_semiring("bool")


def masked_entries(matrix, mask):
    return {(r, j): int(matrix.data[r, j]) for r in range(mask.n) for j in mask.cols(r)}


def masked_match(out, oracle, mask):
    return masked_entries(out, mask) == masked_entries(oracle, mask)


def sparse_pair(n, d, spec, seed, kind="random"):
    rng = np.random.default_rng(seed)
    gen = random_d_sparse if kind == "random" else block_diagonal
    a, b = gen(n, d, spec, rng), gen(n, d, spec, rng)
    return a, b, default_mask(a, b, d)


def mixed_instance(n, d, light, spec, rng):
    """Dense d-blocks on the first half, `light`-sparse rows on the second."""
    from mpcmm.instances import random_value

    entries = {}
    half = n // 2
    for blk in range(half // d):
        base = blk * d
        for r in range(d):
            for c in range(d):
                entries[(base + r, base + c)] = random_value(spec, rng)
    perm = rng.permutation(half)
    for r in range(half, n):
        for i in range(light):
            c = half + (int(perm[r - half]) + i) % half
            entries[(r, c)] = random_value(spec, rng)
    return SparseMatrix.from_entries(n, n, [(r, c, v) for (r, c), v in entries.items()])


class TestMask:
    def test_default_mask_respects_capacities(self):
        a, b, mask = sparse_pair(32, 3, INT, 0)
        col_use = {}
        for r in range(32):
            assert len(mask.cols(r)) <= 3
            for j in mask.cols(r):
                col_use[j] = col_use.get(j, 0) + 1
        assert all(v <= 3 for v in col_use.values())

    def test_blockdiag_mask_is_block_structured(self):
        a, b, mask = sparse_pair(16, 4, INT, 1, kind="blockdiag")
        for r in range(16):
            blk = r // 4
            assert mask.cols(r) == tuple(range(blk * 4, blk * 4 + 4))

    def test_mask_validation(self):
        from mpcmm import OutputMask

        with pytest.raises(ValueError):
            OutputMask(2, 1, ((0, 1), (0,)))  # row over capacity
        with pytest.raises(ValueError):
            OutputMask(2, 1, ((0,), (0,)))  # column used twice


class TestTrivial:
    def test_diagonal_single_round(self):
        entries = [(i, i, i + 1) for i in range(8)]
        a = SparseMatrix.from_entries(8, 8, entries)
        b = SparseMatrix.from_entries(8, 8, entries)
        mask = default_mask(a, b, 1)
        sched = schedule_sparse_trivial(8, 1, a, b, mask, INT)
        result, out = sched.execute()
        assert result.transcript.rounds == 1
        assert result.transcript.max_sent() == 0  # all factors are resident
        for i in range(8):
            assert int(out.data[i, i]) == (i + 1) ** 2

    def test_random_two_sparse_eight(self):
        a, b, mask = sparse_pair(8, 2, INT, 2)
        sched = schedule_sparse_trivial(8, 2, a, b, mask, INT)
        result, out = sched.execute()
        assert result.transcript.rounds <= 4 * 2
        assert masked_match(out, naive_multiply(a, b, INT), mask)

    def test_boolean_three_sparse_sixteen(self):
        a, b, mask = sparse_pair(16, 3, BOOL, 3)
        _, out = schedule_sparse_trivial(16, 3, a, b, mask, BOOL).execute()
        assert masked_match(out, naive_multiply(a, b, BOOL), mask)

    @pytest.mark.parametrize("d", [2, 4, 8])
    def test_rounds_within_4d(self, d):
        a, b, mask = sparse_pair(64, d, INT, d)
        sched = schedule_sparse_trivial(64, d, a, b, mask, INT)
        result, out = sched.execute()
        assert result.transcript.rounds <= 4 * d
        assert masked_match(out, naive_multiply(a, b, INT), mask)
        assert assert_transcript(result.transcript, sched.config)

    def test_sparsity_violation_rejected(self):
        a, b, mask = sparse_pair(8, 2, INT, 4)
        fat = SparseMatrix.from_entries(8, 8, [(0, c, 1) for c in range(5)])
        with pytest.raises(ValueError):
            schedule_sparse_trivial(8, 2, fat, b, mask, INT)


class TestDecompose:
    def test_block_diagonal_single_layer_covers_everything(self):
        a, b, mask = sparse_pair(256, 16, INT, 5, kind="blockdiag")
        decomp = decompose(a, b, mask, EpsilonSchedule())
        assert len(decomp.layers) == 1
        assert len(decomp.layers[0]) == 16
        assert decomp.residual.remaining_terms == 0
        assert decomp.covered_terms == decomp.total_terms == 256 * 16 * 16
        assert decomp.meets_layer_budget and decomp.meets_residual_budget

    def test_empty_matrices(self):
        a = SparseMatrix.from_entries(8, 8, [])
        decomp = decompose(a, a, default_mask(a, a, 2), EpsilonSchedule())
        assert decomp.layers == [] and decomp.total_terms == 0
        assert decomp.residual.remaining_terms == 0

    def test_random_instance_budgets_and_census(self):
        a, b, mask = sparse_pair(256, 16, INT, 6)
        eps = EpsilonSchedule(0.0, 0.1)
        decomp = decompose(a, b, mask, eps)
        assert len(decomp.layers) <= iteration_budget(0.0, 0.1, 16)
        assert decomp.residual.remaining_terms <= decomp.residual_budget
        census_against_ledger(a, b, mask, decomp)

    def test_blockdiag_census(self):
        a, b, mask = sparse_pair(64, 4, INT, 7, kind="blockdiag")
        decomp = decompose(a, b, mask, EpsilonSchedule())
        census_against_ledger(a, b, mask, decomp)

    def test_layer_blocks_are_disjoint(self):
        a, b, mask = sparse_pair(256, 16, INT, 8, kind="blockdiag")
        decomp = decompose(a, b, mask, EpsilonSchedule())
        for layer in decomp.layers:
            rows, ks, cols = set(), set(), set()
            for blk in layer:
                assert not (rows & set(blk.rows))
                assert not (ks & set(blk.ks))
                assert not (cols & set(blk.cols))
                rows |= set(blk.rows)
                ks |= set(blk.ks)
                cols |= set(blk.cols)
                assert len(blk.rows) <= 16 and len(blk.ks) <= 16 and len(blk.cols) <= 16


def census_against_ledger(a, b, mask, decomp):
    """Exhaustive term conservation: layers + residual = every masked term."""
    covered = [t for layer in decomp.layers for blk in layer for t in blk.terms]
    residual = list(decomp.residual.terms())
    combined = sorted(covered + residual)
    assert len(set(combined)) == len(combined), "a term is claimed twice"
    assert combined == sorted(build_ledger(a, b, mask).terms())


class TestTwoPhase:
    def test_blockdiag_beats_trivial_by_half(self):
        a, b, mask = sparse_pair(256, 16, INT, 9, kind="blockdiag")
        trivial = schedule_sparse_trivial(256, 16, a, b, mask, INT)
        two = schedule_sparse_twophase(256, 16, a, b, mask, EpsilonSchedule(), INT)
        assert two.program.total_rounds * 2 <= trivial.program.total_rounds
        result, out = two.execute()
        assert masked_match(out, naive_multiply(a, b, INT), mask)
        assert assert_transcript(result.transcript, two.config)

    def test_empty_b_runs_zero_rounds(self):
        rng = np.random.default_rng(10)
        a = random_d_sparse(16, 2, INT, rng)
        b = SparseMatrix.from_entries(16, 16, [])
        mask = default_mask(a, b, 2)
        sched = schedule_sparse_twophase(16, 2, a, b, mask, EpsilonSchedule(), INT)
        result, out = sched.execute()
        assert result.transcript.rounds <= 1  # nothing to compute or fetch
        assert np.array_equal(out.data, INT.zeros(16, 16))

    def test_random_never_worse_than_trivial_plus_two(self):
        for seed in range(4):
            a, b, mask = sparse_pair(64, 4, INT, 20 + seed)
            trivial = schedule_sparse_trivial(64, 4, a, b, mask, INT)
            two = schedule_sparse_twophase(64, 4, a, b, mask, EpsilonSchedule(), INT)
            assert two.program.total_rounds <= trivial.program.total_rounds + 2
            _, out = two.execute()
            assert masked_match(out, naive_multiply(a, b, INT), mask)

    def test_all_semirings_blockdiag(self, semiring):
        a, b, mask = sparse_pair(64, 4, semiring, 11, kind="blockdiag")
        _, out = schedule_sparse_twophase(64, 4, a, b, mask, EpsilonSchedule(), semiring).execute()
        assert masked_match(out, naive_multiply(a, b, semiring), mask)

    def test_blockdiag_nonsquare_d_still_correct(self):
        a, b, mask = sparse_pair(24, 8, INT, 12, kind="blockdiag")
        sched = schedule_sparse_twophase(24, 8, a, b, mask, EpsilonSchedule(), INT)
        result, out = sched.execute()
        assert masked_match(out, naive_multiply(a, b, INT), mask)
        trivial = schedule_sparse_trivial(24, 8, a, b, mask, INT)
        assert result.transcript.rounds <= trivial.program.total_rounds + 2

    @pytest.mark.parametrize("name", ["int", "tropical"])
    def test_layers_and_residual_coexist(self, name):
        """Dense blocks up front plus light random rows: both phases live."""
        spec = get_semiring(name)
        n, d, light = 128, 16, 2
        a = mixed_instance(n, d, light, spec, np.random.default_rng(31))
        b = mixed_instance(n, d, light, spec, np.random.default_rng(32))
        mask = default_mask(a, b, d)
        decomp = decompose(a, b, mask, EpsilonSchedule())
        assert decomp.layers and decomp.residual.remaining_terms > 0
        census_against_ledger(a, b, mask, decomp)
        two = schedule_sparse_twophase(n, d, a, b, mask, EpsilonSchedule(), spec)
        assert not two.meta["fallback"]
        result, out = two.execute()
        assert masked_match(out, naive_multiply(a, b, spec), mask)
        assert assert_transcript(result.transcript, two.config)
        trivial = schedule_sparse_trivial(n, d, a, b, mask, spec)
        assert two.program.total_rounds < trivial.program.total_rounds


class TestIterationBudget:
    def test_example_d_1024(self):
        improved = iteration_budget(0.0, 0.1, 1024)
        old = iteration_budget(0.0, 0.1, 1024, improved=False)
        assert improved == 8 * 16 == 128  # 1024**0.4 is exactly 16
        assert old == 8 * 32 == 256
        assert improved < old

    def test_eps2_zero_means_no_reduction(self):
        assert iteration_budget(0.0, 0.0, 64) == 1

    def test_improved_never_exceeds_old(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            eps1 = float(rng.uniform(0.0, 0.3))
            eps2 = eps1 + float(rng.uniform(0.05, 0.2))
            d = int(rng.integers(2, 4096))
            assert iteration_budget(eps1, eps2, d) <= iteration_budget(eps1, eps2, d, improved=False)

    def test_ordering_validated(self):
        with pytest.raises(ValueError):
            iteration_budget(0.2, 0.1, 64)
        with pytest.raises(ValueError):
            EpsilonSchedule(0.3, 0.2)
        with pytest.raises(ValueError):
            EpsilonSchedule(-0.1, 0.2)
