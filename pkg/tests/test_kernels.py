from __future__ import annotations

import random

import pytest

from dialeval._kernels import BACKEND, pure

try:
    from dialeval._kernels import _speedups as compiled
except ImportError:
    compiled = None

from .oracles import lcs_oracle

backends = [pure] + ([compiled] if compiled is not None else [])


def random_seq(rng, max_len=20, vocab=5):
    return [rng.randrange(vocab) for _ in range(rng.randrange(max_len + 1))]


@pytest.mark.parametrize("impl", backends, ids=lambda m: m.BACKEND)
class TestKernelCorrectness:
    def test_lcs_against_oracle(self, impl):
        rng = random.Random(1)
        for _ in range(300):
            a, b = random_seq(rng), random_seq(rng)
            assert impl.lcs_length(a, b) == lcs_oracle(a, b)

    def test_ngram_overlap_against_counting(self, impl):
        rng = random.Random(2)
        for _ in range(300):
            a, b = random_seq(rng), random_seq(rng)
            n = rng.randint(1, 4)
            clipped, ct, rt = impl.ngram_overlap(a, b, n)
            assert ct == max(len(a) - n + 1, 0)
            assert rt == max(len(b) - n + 1, 0)
            grams_a = [tuple(a[i : i + n]) for i in range(max(len(a) - n + 1, 0))]
            grams_b = [tuple(b[i : i + n]) for i in range(max(len(b) - n + 1, 0))]
            expected = sum(
                min(grams_a.count(g), grams_b.count(g)) for g in set(grams_a)
            )
            assert clipped == expected

    def test_meteor_stats_identity_and_disjoint(self, impl):
        assert impl.meteor_stats([0, 1, 2], [0, 1, 2]) == (3, 1)
        assert impl.meteor_stats([0, 1], [2, 3]) == (0, 0)
        assert impl.meteor_stats([], []) == (0, 0)

    def test_meteor_stats_scrambled(self, impl):
        # "on the mat sat the cat" vs "the cat sat on the mat"
        cand = [0, 1, 2, 3, 1, 4]
        ref = [1, 4, 3, 0, 1, 2]
        assert impl.meteor_stats(cand, ref) == (6, 3)

    def test_meteor_matches_is_min_count_sum(self, impl):
        rng = random.Random(3)
        for _ in range(200):
            a, b = random_seq(rng, max_len=10, vocab=3), random_seq(rng, max_len=10, vocab=3)
            matches, chunks = impl.meteor_stats(a, b)
            expected = sum(min(a.count(w), b.count(w)) for w in set(a))
            assert matches == expected
            if matches:
                assert 1 <= chunks <= matches
            else:
                assert chunks == 0

    def test_large_ids_fall_back_cleanly(self, impl):
        # ids above the 16-bit packing range must still count correctly
        a = [70000, 70001, 70000]
        b = [70000, 70000, 70001]
        assert impl.ngram_overlap(a, b, 2) == (1, 2, 2)
        assert impl.lcs_length(a, b) == 2


@pytest.mark.skipif(compiled is None, reason="compiled extension not built")
class TestBackendAgreement:
    def test_all_kernels_agree_on_random_inputs(self):
        rng = random.Random(9)
        for _ in range(500):
            a, b = random_seq(rng, max_len=15, vocab=4), random_seq(rng, max_len=15, vocab=4)
            assert pure.lcs_length(a, b) == compiled.lcs_length(a, b)
            for n in (1, 2, 3, 4):
                assert pure.ngram_overlap(a, b, n) == compiled.ngram_overlap(a, b, n)
            assert pure.meteor_stats(a, b) == compiled.meteor_stats(a, b)

    def test_active_backend_is_reported(self):
        assert BACKEND in {"pure", "compiled"}
