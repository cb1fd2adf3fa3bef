import numpy as np
import pytest

from copyspec.analysis import (
    EmbeddingModel,
    cosine_similarity,
    cs_profile,
    left_context_pairs,
    load_embedding,
    next_token_probs,
    pair_similarities,
    permutation_baseline,
    save_embedding,
    sweep,
    sweep_long_rows,
    train_left_skipgram,
    transcript_metrics,
    write_long_csv,
)
from copyspec.engine import EngineConfig, run_corpus
from copyspec.errors import ConfigError, VocabTooLarge, ZeroVector
from copyspec.metrics import CostModel, mean_metrics


class TestCosine:
    def test_hand_values(self):
        assert cosine_similarity([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0, abs=1e-9)
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-9)
        assert cosine_similarity([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.70710678, abs=1e-8)
        assert cosine_similarity([1.0, 0.0], [-3.0, 0.0]) == pytest.approx(-1.0, abs=1e-9)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])

    def test_symmetric_and_scale_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            a, b = rng.normal(size=4), rng.normal(size=4)
            cs = cosine_similarity(a, b)
            assert -1.0 <= cs <= 1.0
            assert cosine_similarity(b, a) == pytest.approx(cs, abs=1e-12)
            assert cosine_similarity(3.5 * a, 0.2 * b) == pytest.approx(cs, abs=1e-12)


class TestSkipgram:
    def test_pairs(self):
        ctx, nxt = left_context_pairs([[0, 0, 1]], 2)
        assert ctx.tolist() == [[0, 0]]
        assert nxt.tolist() == [1]
        ctx, nxt = left_context_pairs([[0, 1]], 3)
        assert len(nxt) == 0

    def test_learns_a_deterministic_successor(self):
        corpus = [[0, 0, 1]] * 20
        emb = train_left_skipgram(corpus, 2, dim=8, epochs=60, learning_rate=0.5, seed=1)
        assert int(np.argmax(next_token_probs(emb, [0, 0]))) == 1

    def test_single_symbol_vocabulary(self):
        emb = train_left_skipgram([[0, 0, 0, 0]], 1, dim=4, epochs=3)
        assert next_token_probs(emb, [0]).tolist() == [1.0]

    def test_same_seed_same_vectors(self):
        corpus = [[0, 1, 2, 3, 1, 2, 0, 3] * 5]
        a = train_left_skipgram(corpus, 2, dim=6, epochs=5, seed=9)
        b = train_left_skipgram(corpus, 2, dim=6, epochs=5, seed=9)
        c = train_left_skipgram(corpus, 2, dim=6, epochs=5, seed=10)
        np.testing.assert_array_equal(a.vectors, b.vectors)
        assert not np.array_equal(a.vectors, c.vectors)

    def test_loss_goes_down(self):
        corpus = planted_corpus(seed=1, sequences=10)
        emb = train_left_skipgram(corpus, 2, dim=8, epochs=20, learning_rate=0.2, seed=3)
        assert len(emb.losses) == 20
        assert emb.losses[-1] < emb.losses[0]
        upticks = sum(b > a * 1.10 for a, b in zip(emb.losses, emb.losses[1:]))
        assert upticks == 0

    def test_vocab_limit(self):
        with pytest.raises(VocabTooLarge):
            train_left_skipgram([[0, 1, 2]], 1, vocab_size=5001)

    def test_bad_shapes(self):
        with pytest.raises(ConfigError):
            train_left_skipgram([[0, 1]], 1, dim=1)
        with pytest.raises(ConfigError):
            EmbeddingModel(np.zeros((3, 1)), 1)

    def test_save_load(self, tmp_path):
        emb = train_left_skipgram([[0, 1, 2, 0, 1, 2]], 2, dim=4, epochs=2)
        path = tmp_path / "emb" / "e.safetensors"
        save_embedding(emb, path)
        loaded = load_embedding(path)
        assert loaded.gamma == 2
        np.testing.assert_array_equal(loaded.vectors, emb.vectors)


def planted_corpus(seed=0, sequences=40, length=60, groups=3, per_group=4, p_follow=0.9):
    """Next token comes from the majority group of the previous three with probability p_follow."""
    rng = np.random.default_rng(seed)
    corpus = []
    for _ in range(sequences):
        seq = rng.integers(0, groups * per_group, size=3).tolist()
        while len(seq) < length:
            recent = [t // per_group for t in seq[-3:]]
            counts = np.bincount(recent, minlength=groups)
            group = int(np.argmax(counts)) if rng.random() < p_follow else int(rng.integers(0, groups))
            seq.append(group * per_group + int(rng.integers(0, per_group)))
        corpus.append(seq)
    return corpus


class TestSimilarityProfile:
    def test_single_pair(self):
        emb = EmbeddingModel(np.array([[1.0, 0.0], [0.0, 1.0]]), gamma=2)
        stats = pair_similarities([[0, 0, 1]], emb, 2)
        assert stats.values.tolist() == [0.0]
        assert stats.mean == 0.0 and stats.stderr == 0.0

    def test_repeated_symbol(self):
        emb = train_left_skipgram([[0] * 10], 3, dim=4, epochs=2)
        assert cs_profile([[0] * 10], emb, [1, 2, 3]) == [
            (1, pytest.approx(1.0)), (2, pytest.approx(1.0)), (3, pytest.approx(1.0))]

    def test_gamma_beyond_embedding(self):
        emb = EmbeddingModel(np.eye(3), gamma=2)
        with pytest.raises(ConfigError):
            cs_profile([[0, 1, 2]], emb, [1, 3])

    def test_retrains_per_gamma(self):
        profile = cs_profile([[0, 1, 2] * 10], None, [1, 2], dim=4, epochs=3)
        assert [g for g, _ in profile] == [1, 2]

    def test_planted_dependence_beats_permutation(self):
        corpus = planted_corpus()
        emb = train_left_skipgram(corpus, 3, dim=8, epochs=30, learning_rate=0.5, seed=42)
        true = pair_similarities(corpus, emb, 3)
        perm = permutation_baseline(corpus, emb, 3, seed=42)
        assert len(true.values) == len(perm.values) == 40 * 57
        combined_se = np.hypot(true.stderr, perm.stderr)
        assert true.mean - perm.mean >= 3 * combined_se


class TestSweep:
    def test_single_value_matches_direct_run(self, small_redundant):
        b = small_redundant
        cost = CostModel()
        base = EngineConfig(gamma=3)
        result = sweep(b.transcripts, b.vocab, b.target, None, base, "gamma", [3], cost)
        direct = run_corpus(b.transcripts, b.vocab, b.target, None, base, cost)
        expected = mean_metrics([transcript_metrics(r, cost) for r in direct])
        (point,) = result.points
        assert point.value == 3
        assert point.metrics == expected
        assert point.copy_attempts == expected.copy_attempts
        assert [tid for tid, _ in point.per_transcript] == [r.transcript_id for r in direct]

    @pytest.mark.parametrize("axis,values", [
        ("gamma", []),
        ("gamma", [3, 3]),
        ("gamma", [4, 2]),
        ("temperature", [1, 2]),
        ("gamma", [0, 1]),
    ])
    def test_invalid(self, small_redundant, axis, values):
        b = small_redundant
        with pytest.raises(ConfigError):
            sweep(b.transcripts, b.vocab, b.target, None, EngineConfig(), axis, values)

    def test_chunk_axis_and_long_rows(self, small_redundant, tmp_path):
        b = small_redundant
        result = sweep(b.transcripts, b.vocab, b.target, None, EngineConfig(), "chunk_len", [5, 10])
        assert [p.value for p in result.points] == [5, 10]
        rows = sweep_long_rows(result)
        assert len(rows) == 2 * 5
        path = tmp_path / "plot.csv"
        write_long_csv(path, rows)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "value,metric,number"
        assert len(lines) == 11

    def test_deterministic(self, small_redundant):
        b = small_redundant
        run = lambda: sweep(b.transcripts, b.vocab, b.target, None, EngineConfig(), "gamma", [2, 4])
        assert [p.metrics for p in run().points] == [p.metrics for p in run().points]
