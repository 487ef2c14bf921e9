"""Per-mention confidence in the local predictions: the softmax-max score
h1, the trained binary classifier h2, and the ascending-confidence mention
ordering that drives the search expansion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .cache import ScoredInstance
from .errors import DataError
from .features import fit_binner, is_acronym, rbf_bin
from .params import ModelParams

H2_FEATURE_COUNT = 5
H2_HIDDEN = (100, 20)


def h1(local_scores: np.ndarray) -> float:
    """Max of the softmax-normalized local scores; in [1/k, 1]."""
    return float(nn.softmax(np.asarray(local_scores)).max())


def h2_features(surface: str, n_tokens: int, local_scores: np.ndarray) -> np.ndarray:
    """Five confidence cues for one mention: softmax max, second max,
    entropy (natural log, 0 for k=1), acronym flag, mention token length."""
    l = nn.softmax(np.asarray(local_scores))
    srt = np.sort(l)[::-1]
    second = float(srt[1]) if l.size > 1 else 0.0
    return np.array(
        [float(srt[0]), second, nn.entropy(l), float(is_acronym(surface)), float(n_tokens)]
    )


def _mention_h2_features(cache: ScoredInstance, i: int) -> np.ndarray:
    mi = cache.instance.active[i]
    m = cache.instance.document.mentions[mi]
    k = int(cache.ncand[i])
    return h2_features(m.surface, m.end - m.start, cache.psi[i, :k])


def h2_prob(feats: np.ndarray, params: ModelParams) -> float:
    """Probability that the local prediction is correct."""
    if params.h2_constant is not None:
        return float(params.h2_constant)
    if params.h2_mlp is None or len(params.h2_binners) != H2_FEATURE_COUNT:
        raise DataError("h2 classifier not trained")
    x = np.concatenate([rbf_bin(float(v), b) for v, b in zip(feats, params.h2_binners)])
    out, _ = params.h2_mlp.forward(x[None, :])
    return float(out[0, 0])


@dataclass
class ConfidenceReport:
    confidence: np.ndarray  # per active mention, document order
    order: list[int]  # mention positions, ascending confidence
    flagged: np.ndarray | None = None  # h2 only: predicted-incorrect mask


def order_mentions(cache: ScoredInstance, heuristic: str, params: ModelParams) -> ConfidenceReport:
    """Ascending-confidence ordering of the active mentions; ties keep
    document position. For h2, mentions with probability < 0.5 are flagged
    as predicted incorrect (the flexible-depth budget)."""
    if heuristic == "h1":
        conf = np.array([h1(cache.psi[i, : cache.ncand[i]]) for i in range(cache.n)])
        flagged = None
    elif heuristic == "h2":
        conf = np.array(
            [h2_prob(_mention_h2_features(cache, i), params) for i in range(cache.n)]
        )
        flagged = conf < 0.5
    else:
        raise ValueError(f"unknown heuristic {heuristic!r}")
    order = sorted(range(cache.n), key=lambda i: (conf[i], i))
    return ConfidenceReport(confidence=conf, order=order, flagged=flagged)


def h2_training_set(caches: list[ScoredInstance]):
    """One sample per gold-labelled local prediction: features plus a label
    that is 1 when the local argmax hits gold."""
    feats, labels = [], []
    for cache in caches:
        pred = cache.local_argmax()
        for i in range(cache.n):
            if cache.gold_cidx[i] < 0:
                continue
            feats.append(_mention_h2_features(cache, i))
            labels.append(1 if pred[i] == cache.gold_cidx[i] else 0)
    return np.array(feats), np.array(labels, dtype=np.int64)


def train_h2(
    caches: list[ScoredInstance], epochs: int, lr: float, seed: int
) -> tuple[nn.Mlp | None, list, float | None, dict]:
    """Train the h2 classifier on balanced data: positives are sub-sampled
    (seeded) down to the negative count. Degenerate label sets fall back to
    a constant classifier with a warning in the report.

    Returns (mlp, binners, constant, report).
    """
    rng = np.random.default_rng(seed)
    feats, labels = h2_training_set(caches)
    if feats.size == 0:
        raise DataError("no gold-labelled local predictions to train h2 on")
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    report: dict = {"positives": int(pos.size), "negatives": int(neg.size)}
    if neg.size == 0 or pos.size == 0:
        constant = 1.0 if neg.size == 0 else 0.0
        report["warning"] = f"degenerate labels; h2 fixed at {constant}"
        return None, [], constant, report
    if pos.size > neg.size:
        pos = np.sort(rng.choice(pos, size=neg.size, replace=False))
    idx = np.concatenate([pos, neg])
    X_raw, y = feats[idx], labels[idx]
    binners = [fit_binner(feats[:, f]) for f in range(H2_FEATURE_COUNT)]
    X = np.stack(
        [
            np.concatenate([rbf_bin(float(v), b) for v, b in zip(row, binners)])
            for row in X_raw
        ]
    )
    mlp = nn.Mlp.create(
        [X.shape[1], H2_HIDDEN[0], H2_HIDDEN[1], 1], ["relu", "relu", "sigmoid"], rng
    )
    history = []
    for _ in range(epochs):
        order = rng.permutation(len(y))
        total = 0.0
        for s in order:
            p, cache_fw = mlp.forward(X[s : s + 1])
            loss, dp = nn.binary_cross_entropy(float(p[0, 0]), int(y[s]))
            grads, _ = mlp.backward(cache_fw, np.array([[dp]]))
            nn.sgd_step(mlp.params(), grads, lr)
            total += loss
        history.append(total / len(y))
    report["loss"] = history
    report["balanced_size"] = int(len(y))
    return mlp, binners, None, report
