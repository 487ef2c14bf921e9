"""Local model contracts: attention algebra, contextual features, the MLP
score head, and the two-tier training procedure."""

import numpy as np
import pytest

from conftest import make_kb
from ldslink import nn
from ldslink.corpus import Document, Mention, build_instance
from ldslink.local_model import (
    attention_loss_and_grads,
    attention_weights,
    context_embedding,
    contextual_features,
    fit_feature_binners,
    gather_samples,
    hidden_sizes,
    local_score,
    mention_feature_matrix,
    pretrain_attention,
    score_instance,
    score_mention,
    train_local_mlp,
)
from ldslink.params import ModelParams


def simple_doc(surfaces, golds, words=("w1", "w2")):
    tokens, sentences, mentions = [], [], []
    for s, g in zip(surfaces, golds):
        start = len(tokens)
        tokens.extend([s, *words])
        sentences.append((start, len(tokens)))
        mentions.append(Mention(start=start, end=start + 1, surface=s, gold_entity=g))
    return Document(id="doc", tokens=tokens, sentences=sentences, mentions=mentions)


def separable_dataset(d=4, n_mentions=12, k=3, seed=0):
    """Gold candidate always carries prior 1.0; the rest 0.0."""
    rng = np.random.default_rng(seed)
    n_ent = n_mentions * k
    emb = {e: rng.standard_normal(d) for e in range(n_ent)}
    aliases = {}
    golds = []
    surfaces = []
    for i in range(n_mentions):
        gold = i * k
        others = [i * k + j for j in range(1, k)]
        aliases[f"s{i}"] = [(gold, 1.0)] + [(o, 0.0) for o in others]
        golds.append(gold)
        surfaces.append(f"s{i}")
    kb = make_kb(d=d, n=n_ent, aliases=aliases, embeddings=emb)
    lexicon = {w: rng.standard_normal(d) for w in ("w1", "w2")}
    doc = simple_doc(surfaces, golds)
    inst = build_instance(doc, kb, lexicon, k=k)
    return kb, lexicon, [inst]


class TestAttention:
    def test_single_word_gets_full_weight(self):
        Y = np.random.default_rng(0).standard_normal((3, 4))
        W = np.random.default_rng(1).standard_normal((1, 4))
        A = np.random.default_rng(2).standard_normal((4, 4))
        np.testing.assert_allclose(attention_weights(Y, W, A), [1.0], atol=1e-15)

    def test_zero_A_gives_uniform(self):
        Y = np.ones((2, 3))
        W = np.random.default_rng(0).standard_normal((5, 3))
        alpha = attention_weights(Y, W, np.zeros((3, 3)))
        np.testing.assert_allclose(alpha, np.full(5, 0.2), atol=1e-12)

    def test_doubling_A_keeps_argmax_word(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            Y = rng.standard_normal((3, 4))
            W = rng.standard_normal((6, 4))
            A = rng.standard_normal((4, 4))
            a1 = attention_weights(Y, W, A)
            a2 = attention_weights(Y, W, 2.0 * A)
            assert a1.argmax() == a2.argmax()
            assert not np.allclose(a1, a2)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            attention_weights(np.ones((2, 3)), np.ones((4, 3)), np.zeros((5, 5)))

    def test_probability_vector(self):
        rng = np.random.default_rng(4)
        alpha = attention_weights(rng.standard_normal((2, 3)), rng.standard_normal((7, 3)), rng.standard_normal((3, 3)))
        assert abs(alpha.sum() - 1.0) < 1e-12 and (alpha > 0).all()


class TestContextEmbedding:
    def test_one_hot_selects_word(self):
        W = np.random.default_rng(0).standard_normal((4, 3))
        alpha = np.array([0.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(context_embedding(alpha, W), W[2], atol=1e-15)

    def test_uniform_over_identical_words(self):
        w = np.array([1.0, -2.0])
        W = np.stack([w, w])
        np.testing.assert_allclose(context_embedding(np.array([0.5, 0.5]), W), w, atol=1e-15)

    def test_convex_combination_norm_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            W = rng.standard_normal((6, 4))
            alpha = nn.softmax(rng.standard_normal(6))
            c = context_embedding(alpha, W)
            assert np.linalg.norm(c) <= np.linalg.norm(W, axis=1).max() + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            context_embedding(np.ones(2), np.ones((3, 4)))


class TestContextualFeatures:
    def test_zero_B(self):
        c = np.array([1.0, 2.0, 3.0])
        y = np.array([4.0, 5.0, 6.0])
        f = contextual_features(y, np.zeros((3, 3)), c)
        np.testing.assert_allclose(f, np.concatenate([[0.0], np.zeros(3), c]))

    def test_identity_B_unit_basis(self):
        e1 = np.array([1.0, 0.0])
        f = contextual_features(e1, np.eye(2), e1)
        np.testing.assert_allclose(f, [1.0, 1.0, 0.0, 1.0, 0.0])

    @pytest.mark.parametrize("d", [1, 2, 5, 16])
    def test_output_length(self, d):
        rng = np.random.default_rng(d)
        f = contextual_features(rng.standard_normal(d), rng.standard_normal((d, d)), rng.standard_normal(d))
        assert f.shape == (2 * d + 1,)


class TestScoreHead:
    def setup_params(self, kb, instances, seed=0):
        rng = np.random.default_rng(seed)
        params = ModelParams(d=kb.d)
        params.A = rng.standard_normal((kb.d, kb.d))
        params.B = rng.standard_normal((kb.d, kb.d))
        params.lex_binners, params.prior_binner = fit_feature_binners(instances, kb)
        input_dim = 2 * kb.d + 1 + 90 + 10
        h1, h2 = hidden_sizes(input_dim)
        params.local_mlp = nn.Mlp.create([input_dim, h1, h2, 1], ["relu", "relu", "sigmoid"], rng)
        return params

    def test_zero_mlp_scores_half(self):
        kb, lex, insts = separable_dataset()
        params = self.setup_params(kb, insts)
        for w in params.local_mlp.weights:
            w[:] = 0.0
        for b in params.local_mlp.biases:
            b[:] = 0.0
        psi = score_mention(insts[0], kb, params, 0)
        np.testing.assert_allclose(psi, 0.5)

    def test_inference_deterministic(self):
        kb, lex, insts = separable_dataset()
        params = self.setup_params(kb, insts)
        a = score_mention(insts[0], kb, params, 0)
        b = score_mention(insts[0], kb, params, 0)
        np.testing.assert_array_equal(a, b)
        assert np.all((a > 0) & (a < 1))

    def test_forward_matches_manual_arithmetic(self):
        kb, lex, insts = separable_dataset(d=2)
        params = self.setup_params(kb, insts, seed=3)
        X = mention_feature_matrix(insts[0], kb, params, 0)
        mlp = params.local_mlp
        z1 = X @ mlp.weights[0].T + mlp.biases[0]
        a1 = np.maximum(z1, 0)
        z2 = a1 @ mlp.weights[1].T + mlp.biases[1]
        a2 = np.maximum(z2, 0)
        z3 = a2 @ mlp.weights[2].T + mlp.biases[2]
        expected = 1.0 / (1.0 + np.exp(-z3[:, 0]))
        np.testing.assert_allclose(score_mention(insts[0], kb, params, 0), expected, rtol=1e-12)

    def test_local_score_indexes_vector(self):
        kb, lex, insts = separable_dataset()
        params = self.setup_params(kb, insts)
        vec = score_mention(insts[0], kb, params, 0)
        assert local_score(insts[0], kb, params, 0, 1) == pytest.approx(float(vec[1]))

    def test_top1_invariant_to_candidate_reordering(self):
        kb, lex, insts = separable_dataset()
        params = self.setup_params(kb, insts)
        inst = insts[0]
        before = score_mention(inst, kb, params, 0)
        perm = [2, 0, 1]
        inst.candidates[0] = [inst.candidates[0][j] for j in perm]
        after = score_mention(inst, kb, params, 0)
        np.testing.assert_allclose(after, before[perm], rtol=1e-12)
        assert inst.candidates[0][int(after.argmax())].entity_id == 0  # same winning entity


class TestPretrainAttention:
    def test_loss_non_increasing_on_toy_set(self):
        kb, lex, insts = separable_dataset(n_mentions=20)
        _, _, rep = pretrain_attention(insts, kb, epochs=4, lr=0.01, seed=0)
        assert rep["loss"][-1] <= rep["loss"][0] + 1e-9

    def test_gradients_match_finite_differences(self):
        kb, lex, insts = separable_dataset(n_mentions=4, d=3, seed=2)
        samples, _ = gather_samples(insts, kb)
        rng = np.random.default_rng(0)
        A = rng.standard_normal((3, 3)) * 0.5
        B = rng.standard_normal((3, 3)) * 0.5

        def loss_and_grads():
            total, dA, dB = 0.0, np.zeros_like(A), np.zeros_like(B)
            for s in samples:
                l, ga, gb = attention_loss_and_grads(A, B, s)
                total += l
                dA += ga
                dB += gb
            return total, [dA, dB]

        report = nn.grad_check(loss_and_grads, [A, B], step=1e-5)
        assert report.max_rel_err < 1e-6

    def test_seed_determinism(self):
        kb, lex, insts = separable_dataset()
        A1, B1, _ = pretrain_attention(insts, kb, epochs=2, lr=0.05, seed=7)
        A2, B2, _ = pretrain_attention(insts, kb, epochs=2, lr=0.05, seed=7)
        np.testing.assert_array_equal(A1, A2)
        np.testing.assert_array_equal(B1, B2)


class TestTrainLocalMlp:
    def test_separable_priors_reach_perfect_top1(self):
        kb, lex, insts = separable_dataset(n_mentions=12, seed=1)
        params = ModelParams(d=kb.d)
        A, B, _ = pretrain_attention(insts, kb, epochs=2, lr=0.02, seed=0)
        params.A, params.B = A, B
        params.lex_binners, params.prior_binner = fit_feature_binners(insts, kb)
        mlp, rep = train_local_mlp(insts, kb, params, epochs=30, lr=0.1, dropout=0.0, seed=0)
        params.local_mlp = mlp
        scores = score_instance(insts[0], kb, params)
        for pos, mi in enumerate(insts[0].active):
            gold = insts[0].document.mentions[mi].gold_entity
            top = insts[0].candidates[mi][int(np.argmax(scores[pos]))].entity_id
            assert top == gold

    def test_first_epoch_loss_decreases(self):
        kb, lex, insts = separable_dataset(seed=3)
        params = ModelParams(d=kb.d)
        params.A, params.B, _ = *pretrain_attention(insts, kb, epochs=1, lr=0.02, seed=0)[:2], None
        params.lex_binners, params.prior_binner = fit_feature_binners(insts, kb)
        mlp, rep = train_local_mlp(insts, kb, params, epochs=2, lr=0.05, dropout=0.0, seed=0)
        assert rep["loss"][1] < rep["loss"][0]

    def test_attention_frozen_during_mlp_training(self):
        kb, lex, insts = separable_dataset()
        params = ModelParams(d=kb.d)
        A, B, _ = pretrain_attention(insts, kb, epochs=1, lr=0.02, seed=0)
        params.A, params.B = A, B
        A_copy, B_copy = A.copy(), B.copy()
        params.lex_binners, params.prior_binner = fit_feature_binners(insts, kb)
        train_local_mlp(insts, kb, params, epochs=2, lr=0.05, dropout=0.7, seed=0)
        np.testing.assert_array_equal(params.A, A_copy)
        np.testing.assert_array_equal(params.B, B_copy)

    def test_hidden_sizes_rule(self):
        assert hidden_sizes(133) == (200, 50)
        assert hidden_sizes(30) == (120, 30)
        assert hidden_sizes(500) == (200, 50)
