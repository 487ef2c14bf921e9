"""Local mention-candidate compatibility: candidate-aware attention over
context words, contextual + lexical + prior features, an MLP score head,
and the two-tier training procedure (attention matrices first, then the
MLP with the attention frozen)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .corpus import LinkingInstance
from .errors import DataError
from .features import (
    LEXICAL_FEATURE_COUNT,
    N_BINS,
    bin_scalars,
    fit_binner,
    lexical_features,
    rbf_bin,
)
from .kb import KnowledgeBase
from .params import ModelParams


def attention_weights(cand_embs: np.ndarray, context: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Per-word attention: each word scores max over candidates of y'Aw,
    normalized by softmax across words."""
    if cand_embs.shape[1] != A.shape[0] or context.shape[1] != A.shape[1]:
        raise ValueError("dimension mismatch between embeddings and A")
    scores = cand_embs @ A @ context.T  # (k, m)
    return nn.softmax(scores.max(axis=0))


def context_embedding(alpha: np.ndarray, context: np.ndarray) -> np.ndarray:
    """Attention-weighted sum of context word embeddings."""
    if alpha.shape[0] != context.shape[0]:
        raise ValueError("alpha length != context length")
    return alpha @ context


def contextual_features(y: np.ndarray, B: np.ndarray, c: np.ndarray) -> np.ndarray:
    """[y'Bc ; y'B ; c], a (2d+1)-vector."""
    yB = y @ B
    return np.concatenate([[yB @ c], yB, c])


def hidden_sizes(input_dim: int) -> tuple[int, int]:
    """Default 200/50 hidden layers, scaled down for very small inputs."""
    return min(200, 4 * input_dim), min(50, input_dim)


def mention_feature_matrix(
    instance: LinkingInstance, kb: KnowledgeBase, params: ModelParams, mention_idx: int
) -> np.ndarray:
    """Stacked feature rows for every candidate of one active mention:
    contextual (2d+1) + binned lexical (9*10) + binned prior (10)."""
    if params.A is None or params.B is None:
        raise DataError("attention matrices not trained")
    if len(params.lex_binners) != LEXICAL_FEATURE_COUNT or params.prior_binner is None:
        raise DataError("feature binners not fitted")
    cands = instance.candidates[mention_idx]
    if not cands:
        raise DataError(f"mention {mention_idx} has no candidates")
    ctx = instance.contexts[mention_idx]
    m = instance.document.mentions[mention_idx]
    m_tokens = instance.document.tokens[m.start : m.end]
    Y = np.stack([kb.entity(c.entity_id).embedding for c in cands])
    alpha = attention_weights(Y, ctx, params.A)
    c_vec = context_embedding(alpha, ctx)
    rows = []
    for j, cand in enumerate(cands):
        f_c = contextual_features(Y[j], params.B, c_vec)
        lex = lexical_features(m_tokens, list(kb.entity(cand.entity_id).title), instance.document.tokens)
        f_l = bin_scalars(lex, params.lex_binners)
        f_p = rbf_bin(cand.prior, params.prior_binner)
        rows.append(np.concatenate([f_c, f_l, f_p]))
    return np.stack(rows)


def score_mention(
    instance: LinkingInstance, kb: KnowledgeBase, params: ModelParams, mention_idx: int
) -> np.ndarray:
    """Local scores psi for every candidate of one mention (inference path,
    no dropout)."""
    if params.local_mlp is None:
        raise DataError("local MLP not trained")
    X = mention_feature_matrix(instance, kb, params, mention_idx)
    out, _ = params.local_mlp.forward(X)
    return out[:, 0]


def local_score(
    instance: LinkingInstance,
    kb: KnowledgeBase,
    params: ModelParams,
    mention_idx: int,
    cand_idx: int,
) -> float:
    return float(score_mention(instance, kb, params, mention_idx)[cand_idx])


def score_instance(instance: LinkingInstance, kb: KnowledgeBase, params: ModelParams) -> list[np.ndarray]:
    """Fill and return the per-active-mention local score cache."""
    scores = [score_mention(instance, kb, params, mi) for mi in instance.active]
    instance.local_scores = scores
    return scores


def gold_candidate_index(instance: LinkingInstance, mention_idx: int) -> int:
    """Candidate position of the gold entity, or -1 when absent/unlabelled."""
    gold = instance.document.mentions[mention_idx].gold_entity
    if gold is None:
        return -1
    for j, c in enumerate(instance.candidates[mention_idx]):
        if c.entity_id == gold:
            return j
    return -1


@dataclass
class TrainingSample:
    cand_embs: np.ndarray  # (k, d)
    context: np.ndarray  # (m, d)
    gold: int
    mention_idx: int
    instance: LinkingInstance


def gather_samples(instances, kb: KnowledgeBase) -> tuple[list[TrainingSample], int]:
    """Gold-labelled active mentions whose gold entity is in the candidate
    set; the second value counts skipped (gold-outside-candidates) mentions."""
    samples, skipped = [], 0
    for inst in instances:
        for mi in inst.active:
            if inst.document.mentions[mi].gold_entity is None:
                continue
            gold = gold_candidate_index(inst, mi)
            if gold < 0:
                skipped += 1
                continue
            Y = np.stack([kb.entity(c.entity_id).embedding for c in inst.candidates[mi]])
            samples.append(TrainingSample(Y, inst.contexts[mi], gold, mi, inst))
    return samples, skipped


def attention_loss_and_grads(A: np.ndarray, B: np.ndarray, sample: TrainingSample):
    """Cross-entropy of softmax over candidates of y'Bc, with gradients
    flowing through the attention (and hence A)."""
    Y, W, gold = sample.cand_embs, sample.context, sample.gold
    S = Y @ A @ W.T  # (k, m)
    jstar = S.argmax(axis=0)  # winning candidate per word
    t = S[jstar, np.arange(S.shape[1])]
    alpha = nn.softmax(t)
    c = alpha @ W
    scores = Y @ (B @ c)
    loss, delta = nn.cross_entropy(scores, gold)
    yd = Y.T @ delta  # (d,)
    dB = np.outer(yd, c)
    dc = B.T @ yd
    u = W @ dc  # dloss/dalpha
    dt = alpha * (u - alpha @ u)
    dA = (Y[jstar] * dt[:, None]).T @ W
    return loss, dA, dB


def pretrain_attention(
    instances, kb: KnowledgeBase, epochs: int, lr: float, seed: int
) -> tuple[np.ndarray, np.ndarray, dict]:
    """First training tier: learn A and B by per-mention SGD."""
    rng = np.random.default_rng(seed)
    d = kb.d
    A = nn.glorot(d, d, rng)
    B = nn.glorot(d, d, rng)
    samples, skipped = gather_samples(instances, kb)
    if not samples:
        raise DataError("no trainable mentions (gold labels required)")
    history = []
    for _ in range(epochs):
        order = rng.permutation(len(samples))
        total = 0.0
        for idx in order:
            loss, dA, dB = attention_loss_and_grads(A, B, samples[idx])
            nn.sgd_step([A, B], [dA, dB], lr)
            total += loss
        history.append(total / len(samples))
    return A, B, {"loss": history, "skipped": skipped, "samples": len(samples)}


def fit_feature_binners(instances, kb: KnowledgeBase):
    """Fit the nine lexical binners and the prior binner on training data."""
    lex_values = [[] for _ in range(LEXICAL_FEATURE_COUNT)]
    priors = []
    for inst in instances:
        for mi in inst.active:
            m = inst.document.mentions[mi]
            m_tokens = inst.document.tokens[m.start : m.end]
            for cand in inst.candidates[mi]:
                lex = lexical_features(m_tokens, list(kb.entity(cand.entity_id).title), inst.document.tokens)
                for f in range(LEXICAL_FEATURE_COUNT):
                    lex_values[f].append(lex[f])
                priors.append(cand.prior)
    if not priors:
        raise DataError("no candidates to fit binners on")
    return [fit_binner(v) for v in lex_values], fit_binner(priors)


def train_local_mlp(
    instances,
    kb: KnowledgeBase,
    params: ModelParams,
    epochs: int,
    lr: float,
    dropout: float,
    seed: int,
) -> tuple[nn.Mlp, dict]:
    """Second tier: with A, B frozen, train the MLP score head by softmax
    cross-entropy over each mention's candidates, dropout on hidden layers."""
    params.require("attention")
    rng = np.random.default_rng(seed)
    samples, skipped = gather_samples(instances, kb)
    if not samples:
        raise DataError("no trainable mentions (gold labels required)")
    feats = [
        mention_feature_matrix(s.instance, kb, params, s.mention_idx) for s in samples
    ]
    input_dim = feats[0].shape[1]
    h1, h2 = hidden_sizes(input_dim)
    mlp = nn.Mlp.create([input_dim, h1, h2, 1], ["relu", "relu", "sigmoid"], rng)
    history = []
    for _ in range(epochs):
        order = rng.permutation(len(samples))
        total = 0.0
        for idx in order:
            X, gold = feats[idx], samples[idx].gold
            masks = None
            if dropout > 0:
                masks = [
                    nn.dropout_mask((X.shape[0], h1), dropout, rng),
                    nn.dropout_mask((X.shape[0], h2), dropout, rng),
                ]
            psi, cache = mlp.forward(X, masks)
            loss, dpsi = nn.cross_entropy(psi[:, 0], gold)
            grads, _ = mlp.backward(cache, dpsi[:, None])
            nn.sgd_step(mlp.params(), grads, lr)
            total += loss
        history.append(total / len(samples))
    return mlp, {"loss": history, "skipped": skipped, "samples": len(samples)}
