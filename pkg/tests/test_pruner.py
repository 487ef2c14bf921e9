"""Pruning-function contracts: hamming loss, the collective score (manual
pair-sum oracle), ranking-pair construction, and rank training on planted
coherence signal."""

import numpy as np
import pytest

from conftest import make_cache, make_kb
from ldslink import nn
from ldslink.errors import DataError
from ldslink.pruner import (
    PruneStep,
    hamming,
    hamming_between,
    make_ranking_pairs,
    prune_score,
    pruner_loss_and_grads,
    solution_summary,
    train_pruner,
)


class TestHamming:
    def cache(self):
        kb = make_kb(d=2, n=10)
        return make_cache(
            kb,
            [[2 * i, 2 * i + 1] for i in range(5)],
            [[0.5, 0.4]] * 5,
            golds=[0, 2, 4, 6, 8],
        )

    def test_identical_is_zero(self):
        assert hamming(self.cache(), np.zeros(5, dtype=int)) == 0

    def test_two_of_five_differ(self):
        sol = np.array([1, 0, 1, 0, 0])
        assert hamming(self.cache(), sol) == 2

    def test_symmetry_between_assignments(self):
        a = np.array([0, 1, 0, 1, 0])
        b = np.array([1, 1, 0, 0, 0])
        assert hamming_between(a, b) == hamming_between(b, a) == 2

    def test_missing_gold_rejected(self):
        kb = make_kb(d=2, n=4)
        cache = make_cache(kb, [[0, 1], [2, 3]], [[0.5, 0.4]] * 2, golds=[0, None])
        with pytest.raises(DataError):
            hamming(cache, np.zeros(2, dtype=int))


class TestPruneScore:
    def test_single_mention_is_psi_only(self):
        kb = make_kb(d=2, n=2, cooccur={(0, 1): 4})
        cache = make_cache(kb, [[0, 1]], [[0.8, 0.3]])
        s = prune_score(cache, [0], np.ones((2, 2)), np.ones(3))
        assert s.coherence == 0.0
        assert s.total == pytest.approx(0.8)

    def test_zero_weights_reduce_to_local_sum(self):
        kb = make_kb(d=2, n=6, cooccur={(0, 2): 5, (2, 4): 2})
        cache = make_cache(kb, [[0, 1], [2, 3], [4, 5]], [[0.7, 0.1], [0.6, 0.2], [0.9, 0.5]])
        sol = np.array([0, 1, 0])
        s = prune_score(cache, sol, np.zeros((2, 2)), np.zeros(3))
        assert s.coherence == 0.0
        assert s.total == cache.psi_sum(sol)

    def test_three_mention_manual_pair_sum(self):
        co = {(0, 2): 5, (0, 4): 2, (2, 4): 7}
        kb = make_kb(d=2, n=6, cooccur=co)
        cache = make_cache(kb, [[0, 1], [2, 3], [4, 5]], [[0.5, 0.5]] * 3)
        sol = np.zeros(3, dtype=int)  # entities 0, 2, 4
        w_g = np.array([1.0, 0.0, 0.0])
        s = prune_score(cache, sol, np.zeros((2, 2)), w_g)
        expected = np.log(6.0) + np.log(3.0) + np.log(8.0)  # each unordered pair once
        assert s.coherence == pytest.approx(expected, rel=1e-12)

    def test_window_limits_pairs(self):
        kb = make_kb(d=2, n=6, cooccur={(0, 2): 5, (0, 4): 5, (2, 4): 5})
        cache = make_cache(kb, [[0, 1], [2, 3], [4, 5]], [[0.5, 0.5]] * 3, half_window=1)
        s = prune_score(cache, np.zeros(3, dtype=int), np.zeros((2, 2)), np.array([1.0, 0, 0]))
        expected = np.log(6.0) + np.log(6.0)  # pairs (0,1) and (1,2) only
        assert s.coherence == pytest.approx(expected, rel=1e-12)

    def test_total_is_local_plus_coherence(self):
        kb = make_kb(d=2, n=4, cooccur={(0, 2): 3})
        cache = make_cache(kb, [[0, 1], [2, 3]], [[0.7, 0.2], [0.6, 0.1]])
        rng = np.random.default_rng(0)
        s = prune_score(cache, [0, 0], rng.standard_normal((2, 2)), rng.standard_normal(3))
        assert s.total == pytest.approx(s.local + s.coherence, abs=1e-9)


class TestRankingPairs:
    def test_best_paired_against_rest(self):
        sols = [np.array([0, 0]), np.array([0, 1]), np.array([1, 1])]
        pairs = make_ranking_pairs(sols, [0, 2, 3])
        assert len(pairs) == 2
        assert pairs[0].better == (0, 0) and pairs[0].delta == 2.0
        assert pairs[1].worse == (1, 1) and pairs[1].delta == 3.0

    def test_tie_takes_first_in_expansion_order(self):
        sols = [np.array([1]), np.array([0]), np.array([2])]
        pairs = make_ranking_pairs(sols, [1, 1, 1])
        assert all(p.better == (1,) for p in pairs)
        assert all(p.delta == 0.0 for p in pairs)

    def test_n_minus_one_pairs(self):
        sols = [np.array([i]) for i in range(6)]
        assert len(make_ranking_pairs(sols, [3, 0, 1, 4, 2, 5])) == 5

    def test_fewer_than_two_solutions(self):
        assert make_ranking_pairs([np.array([0])], [1]) == []


def planted_steps(n_steps, seed, n=3):
    """Gold assignments pair heavily co-occurring entities; corrupted ones
    do not. Local scores are flat so only coherence separates them."""
    rng = np.random.default_rng(seed)
    steps, caches = [], []
    for _ in range(n_steps):
        co = {}
        golds = [0, 2, 4][:n]
        for a in range(len(golds)):
            for b in range(a + 1, len(golds)):
                co[(golds[a], golds[b])] = int(rng.integers(6, 12))
        kb = make_kb(d=2, n=2 * n, cooccur=co)
        cache = make_cache(
            kb,
            [[2 * i, 2 * i + 1] for i in range(n)],
            [[0.5, 0.5]] * n,
            golds=golds,
        )
        sols = [np.zeros(n, dtype=np.int32)]
        for _ in range(4):
            bad = np.zeros(n, dtype=np.int32)
            flips = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
            bad[flips] = 1
            sols.append(bad)
        steps.append(PruneStep.from_solutions(cache, sols))
        caches.append(cache)
    return steps, caches


class TestTrainPruner:
    def test_planted_signal_ranks_best_first_on_held_out(self):
        train_steps, _ = planted_steps(30, seed=0)
        C_g, w_g, rep = train_pruner(train_steps, d=2, epochs=10, lr=0.02, seed=0)
        held, _ = planted_steps(25, seed=99)
        hits = 0
        for st in held:
            s = st.psi_sums + np.tensordot(st.ee, C_g, axes=([1, 2], [0, 1])) + st.rr @ w_g
            best = min(range(len(s)), key=lambda i: (st.hammings[i], i))
            hits += int(np.argmax(s) == best)
        assert hits / len(held) > 0.8

    def test_gradients_match_finite_differences(self):
        steps, _ = planted_steps(3, seed=1)
        rng = np.random.default_rng(2)
        C_g = rng.standard_normal((2, 2)) * 0.2
        w_g = rng.standard_normal(3) * 0.2

        def loss_and_grads():
            total, dC, dw = 0.0, np.zeros_like(C_g), np.zeros_like(w_g)
            for st in steps:
                l, gc, gw = pruner_loss_and_grads(C_g, w_g, st)
                total += l
                dC += gc
                dw += gw
            return total, [dC, dw]

        report = nn.grad_check(loss_and_grads, [C_g, w_g], step=1e-5)
        assert report.max_rel_err < 1e-6

    def test_satisfied_margins_leave_params_unchanged(self):
        # psi sums already separate the solutions by more than their deltas
        kb = make_kb(d=2, n=4)
        cache = make_cache(kb, [[0, 1], [2, 3]], [[9.0, 0.1], [9.0, 0.1]], golds=[0, 2])
        sols = [np.array([0, 0]), np.array([1, 1])]  # psi sums 18 vs 0.2, delta 2
        step = PruneStep.from_solutions(cache, sols)
        C_g, w_g, rep = train_pruner([step], d=2, epochs=5, lr=0.1, seed=0)
        np.testing.assert_array_equal(C_g, np.zeros((2, 2)))
        np.testing.assert_array_equal(w_g, np.zeros(3))
        assert rep["loss"][-1] == 0.0

    def test_degenerate_steps_skipped(self):
        kb = make_kb(d=2, n=2)
        cache = make_cache(kb, [[0, 1]], [[0.5, 0.5]], golds=[0])
        lone = PruneStep.from_solutions(cache, [np.array([0])])
        C_g, w_g, rep = train_pruner([lone], d=2, epochs=2, lr=0.1, seed=0)
        assert rep["steps"] == 0 and rep["skipped"] == 1

    def test_summary_matches_prune_score(self):
        kb = make_kb(d=2, n=6, cooccur={(0, 2): 5, (2, 4): 2})
        cache = make_cache(kb, [[0, 1], [2, 3], [4, 5]], [[0.7, 0.1], [0.6, 0.2], [0.9, 0.5]])
        rng = np.random.default_rng(3)
        C_g = rng.standard_normal((2, 2))
        w_g = rng.standard_normal(3)
        for sol in ([0, 0, 0], [1, 0, 1], [1, 1, 1]):
            ps, ee, rr = solution_summary(cache, np.array(sol))
            via_summary = ps + float((ee * C_g).sum()) + float(rr @ w_g)
            direct = prune_score(cache, np.array(sol), C_g, w_g).total
            assert via_summary == pytest.approx(direct, abs=1e-9)
