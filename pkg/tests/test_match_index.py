import numpy as np
import pytest

from copyspec.errors import ConfigError, EmptyChunk
from copyspec.match_index import GammaConfig, MatchIndex, MatchResult, extract_chunk, polynomial_hash


def naive_lookup(context, t, gamma):
    if t < gamma:
        return None
    s = list(context[t - gamma:t])
    for p in range(1, t + 1):
        if p + gamma - 1 >= t - gamma + 1:
            return None
        if list(context[p - 1:p - 1 + gamma]) == s:
            return p
    return None


def build_incrementally(context, gamma, rng, hash_fn=polynomial_hash):
    index = MatchIndex(gamma, hash_fn)
    done = 0
    while done < len(context):
        step = int(rng.integers(1, 6))
        upto = min(len(context), done + step)
        index.extend(context[done:upto], context[:upto])
        done = upto
    return index


class TestLookupExamples:
    def test_repeat_of_first_gram(self):
        ctx = [1, 2, 3, 4, 1, 2, 3]
        index = MatchIndex.from_context(ctx, gamma=3)
        assert index.lookup(ctx) == MatchResult(source_pos=1, copy_start=4)
        assert extract_chunk(ctx, index.lookup(ctx), 10) == [4, 1, 2, 3]

    def test_no_match(self):
        ctx = [1, 2, 3, 4, 5]
        index = MatchIndex.from_context(ctx, gamma=2)
        assert index.lookup(ctx) is None

    def test_self_overlap_is_excluded(self):
        ctx = [7, 7, 7]
        index = MatchIndex.from_context(ctx, gamma=2)
        assert index.lookup(ctx) is None

    def test_earliest_occurrence_wins(self):
        ctx = [5, 6, 9, 5, 6, 8, 5, 6]
        index = MatchIndex.from_context(ctx, gamma=2)
        assert index.lookup(ctx).source_pos == 1

    def test_short_context(self):
        ctx = [1]
        index = MatchIndex.from_context(ctx, gamma=3)
        assert index.lookup(ctx) is None
        assert len(index) == 0

    def test_gamma_must_be_positive(self):
        with pytest.raises(ConfigError):
            GammaConfig(0)
        with pytest.raises(ConfigError):
            MatchIndex(0)


class TestChunks:
    def test_chunk_from_spec_context(self):
        ctx = [10, 11, 12, 13, 14]
        assert extract_chunk(ctx, MatchResult(1, 3), 2) == [12, 13]

    def test_chunk_is_truncated_at_context_end(self):
        ctx = [10, 11, 12, 13, 14]
        assert extract_chunk(ctx, MatchResult(1, 4), 10) == [13, 14]

    def test_chunk_past_end(self):
        with pytest.raises(EmptyChunk):
            extract_chunk([1, 2, 3], MatchResult(2, 4), 5)


class TestAgainstOracle:
    def test_randomized_lookups(self):
        rng = np.random.default_rng(1234)
        lookups = 0
        for _ in range(250):
            gamma = int(rng.integers(1, 6))
            alphabet = int(rng.integers(2, 9))
            context = rng.integers(0, alphabet, size=int(rng.integers(0, 200))).tolist()
            index = build_incrementally(context, gamma, rng)
            for t in rng.integers(0, len(context) + 1, size=8).tolist():
                got = index.lookup(context, t)
                want = naive_lookup(context, t, gamma)
                assert (got.source_pos if got else None) == want
                if got:
                    assert got.copy_start == got.source_pos + gamma
                lookups += 1
        assert lookups >= 1000

    def test_colliding_hash_never_false_matches(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            gamma = int(rng.integers(1, 5))
            context = rng.integers(0, 6, size=int(rng.integers(1, 80))).tolist()
            index = build_incrementally(context, gamma, rng, hash_fn=lambda gram: 0)
            for t in range(len(context) + 1):
                got = index.lookup(context, t)
                assert (got.source_pos if got else None) == naive_lookup(context, t, gamma)

    def test_collision_ahead_of_true_match(self):
        def weak(gram):
            return sum(gram) % 3

        ctx = [1, 2, 0, 3, 9, 2, 1, 3, 0]
        # (1, 2), (0, 3), (3, 9) and (2, 1) share the bucket of (3, 0)
        index = MatchIndex.from_context(ctx, gamma=2, hash_fn=weak)
        assert index.lookup(ctx) is None
        ctx2 = ctx + [1, 2]
        index.extend([1, 2], ctx2)
        assert index.lookup(ctx2).source_pos == 1

    def test_incremental_equals_batch(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            gamma = int(rng.integers(1, 6))
            context = rng.integers(0, 5, size=int(rng.integers(0, 120))).tolist()
            batch = MatchIndex.from_context(context, gamma)
            incremental = build_incrementally(context, gamma, rng)
            assert batch.buckets == incremental.buckets
            assert batch.length == incremental.length == len(context)
            assert len(batch) == max(0, len(context) - gamma + 1)


class TestCost:
    @pytest.mark.parametrize("gamma", [1, 3, 6])
    def test_work_per_token_does_not_grow_with_context(self, gamma):
        rng = np.random.default_rng(gamma)
        context = rng.integers(0, 50, size=2000).tolist()
        index = MatchIndex.from_context(context[:10], gamma)
        deltas = []
        for upto in range(11, len(context) + 1):
            before = index.mix_steps
            index.extend(context[upto - 1:upto], context[:upto])
            index.lookup(context[:upto])
            deltas.append(index.mix_steps - before)
        assert set(deltas) == {2 * gamma}

    def test_extend_must_cover_context(self):
        index = MatchIndex(2)
        with pytest.raises(ValueError):
            index.extend([1, 2], [1, 2, 3])

    def test_counters(self):
        index = MatchIndex.from_context([1, 2, 3, 4], 2)
        assert (index.inserted, index.lookups) == (3, 0)
        index.lookup([1])
        assert index.lookups == 0
        index.lookup([1, 2, 3, 4])
        assert index.lookups == 1
        assert index.extend([1], [1, 2, 3, 4, 1]) == 1
        assert index.inserted == 4
