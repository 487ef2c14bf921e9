"""Pairwise entity coherence, the discrepancy propagator, propagation-only
baselines, and mention-wise training of the coherence weights.

The propagator re-scores a candidate as its cached local score plus its
average coherence with the entities currently assigned inside a 30-mention
window (15 each side). Propagating a discrepancy set pins the discrepancy
mentions and synchronously re-assigns every unpinned mention whose window
contains a value-changed mention.
"""

from __future__ import annotations

import numpy as np

from . import kernels, nn
from .cache import ScoredInstance
from .errors import DataError
from .kb import KnowledgeBase
from .params import ModelParams


def phi(e: int, y: int, C: np.ndarray, w: np.ndarray, kb: KnowledgeBase) -> float:
    """Coherence of entity y appearing alongside assigned entity e:
    bilinear embedding term plus weighted pairwise link features."""
    ee = kb.entity(e).embedding
    ye = kb.entity(y).embedding
    return float(ee @ C @ ye + w @ kb.pair_features(e, y))


def entity_context(cache: ScoredInstance, solution, i: int, window: int = 30):
    """Assigned entities of up to window/2 mentions each side of i,
    excluding i itself: a list of (mention position, entity id)."""
    solution = np.asarray(solution)
    half = window // 2
    lo, hi = max(0, i - half), min(cache.n, i + half + 1)
    return [
        (p, int(cache.cand_eid[p, solution[p]]))
        for p in range(lo, hi)
        if p != i
    ]


def _as_solution(cache: ScoredInstance, solution) -> np.ndarray:
    sol = np.asarray(solution, dtype=np.int32)
    if sol.shape != (cache.n,):
        raise ValueError(f"solution length {sol.shape} != {cache.n} active mentions")
    if np.any(sol < 0) or np.any(sol >= cache.ncand):
        raise ValueError("candidate index out of range in solution")
    return sol


def g_scores(cache: ScoredInstance, solution, i: int, utab: np.ndarray) -> np.ndarray:
    """Propagator score of every candidate of mention i under `solution`."""
    sol = _as_solution(cache, solution)
    return np.asarray(
        kernels.g_row(utab, cache.psi, cache.uid, cache.ncand, sol, int(i), cache.half_window)
    )


def g_score(cache: ScoredInstance, solution, i: int, j: int, params: ModelParams) -> float:
    utab = cache.utab(params.C, params.w)
    return float(g_scores(cache, solution, i, utab)[j])


def _validate_discrepancies(cache: ScoredInstance, disc) -> list[tuple[int, int]]:
    pairs = list(disc.items()) if hasattr(disc, "items") else [tuple(p) for p in disc]
    seen = set()
    for pos, j in pairs:
        if pos in seen:
            raise DataError(f"mention {pos} repeated in discrepancy set")
        seen.add(pos)
        if not (0 <= pos < cache.n):
            raise ValueError(f"discrepancy mention {pos} out of range")
        if not (0 <= j < cache.ncand[pos]):
            raise ValueError(f"discrepancy candidate {j} out of range for mention {pos}")
    return pairs


def propagate(
    cache: ScoredInstance,
    initial,
    disc,
    params: ModelParams | None = None,
    utab: np.ndarray | None = None,
) -> np.ndarray:
    """Apply a discrepancy set to the initial solution and propagate.

    Pinned (discrepancy) mentions keep their forced candidates. Every other
    mention whose context window contains a value-changed mention is
    re-assigned to its best propagator score, computed in one synchronous
    pass against the frozen post-discrepancy assignment; ties resolve to
    the lower candidate index.
    """
    if utab is None:
        if params is None:
            raise ValueError("propagate needs params or a precomputed utab")
        utab = cache.utab(params.C, params.w)
    assign = _as_solution(cache, initial).copy()
    pairs = _validate_discrepancies(cache, disc)
    changed = [pos for pos, j in pairs if assign[pos] != j]
    for pos, j in pairs:
        assign[pos] = j
    if not changed:
        return assign
    pinned = {pos for pos, _ in pairs}
    hw = cache.half_window
    targets = np.array(
        [
            i
            for i in range(cache.n)
            if i not in pinned and any(abs(i - k) <= hw for k in changed)
        ],
        dtype=np.int32,
    )
    if targets.size == 0:
        return assign
    out = assign.copy()
    out[targets] = kernels.sweep_argmax(
        utab, cache.psi, cache.uid, cache.ncand, assign, targets, hw
    )
    return out


def iterate_propagation(
    cache: ScoredInstance,
    solution,
    params: ModelParams | None = None,
    max_iters: int = 50,
    utab: np.ndarray | None = None,
) -> tuple[np.ndarray, int, bool]:
    """Full synchronous re-assignment sweeps until a fixed point or
    max_iters. One sweep is the 1-step propagation baseline. Returns
    (solution, sweeps used, converged)."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if utab is None:
        if params is None:
            raise ValueError("iterate_propagation needs params or a precomputed utab")
        utab = cache.utab(params.C, params.w)
    cur = _as_solution(cache, solution).copy()
    everyone = np.arange(cache.n, dtype=np.int32)
    for it in range(1, max_iters + 1):
        nxt = np.asarray(
            kernels.sweep_argmax(utab, cache.psi, cache.uid, cache.ncand, cur, everyone, cache.half_window),
            dtype=np.int32,
        )
        if np.array_equal(nxt, cur):
            return cur, it, True
        cur = nxt
    return cur, max_iters, False


def coherence_design(caches: list[ScoredInstance]):
    """Static per-mention design data for training C and w: mean gold
    context embedding, candidate embeddings and mean pairwise features
    against the gold context. Mentions lacking a gold label, a gold
    candidate, or any gold-labelled window mate are skipped."""
    samples = []
    skipped = 0
    for cache in caches:
        kb = cache.kb
        golds = cache.gold_eids()
        hw = cache.half_window
        for i in range(cache.n):
            if cache.gold_cidx[i] < 0:
                skipped += 1
                continue
            mates = [
                p
                for p in range(max(0, i - hw), min(cache.n, i + hw + 1))
                if p != i and golds[p] >= 0
            ]
            if not mates:
                skipped += 1
                continue
            ebar = np.mean([kb.entity(int(golds[p])).embedding for p in mates], axis=0)
            k = int(cache.ncand[i])
            Y = cache.emb[cache.uid[i, :k]]
            rho = np.stack(
                [
                    np.mean(
                        [kb.pair_features(int(golds[p]), int(cache.cand_eid[i, j])) for p in mates],
                        axis=0,
                    )
                    for j in range(k)
                ]
            )
            samples.append((cache.psi[i, :k], Y, ebar, rho, int(cache.gold_cidx[i])))
    return samples, skipped


def coherence_loss_and_grads(C: np.ndarray, w: np.ndarray, sample):
    """Softmax cross-entropy over one mention's propagator scores with gold
    contexts; gradients w.r.t. C and w only (local scores frozen)."""
    psi_row, Y, ebar, rho, gold = sample
    scores = psi_row + (ebar @ C) @ Y.T + rho @ w
    loss, delta = nn.cross_entropy(scores, gold)
    dC = np.outer(ebar, delta @ Y)
    dw = delta @ rho
    return loss, dC, dw


def train_coherence(
    caches: list[ScoredInstance], d: int, epochs: int, lr: float, seed: int = 0
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Minimize the mention-wise cross-entropy over C and w. The objective
    is convex in (C, w), so deterministic full-batch gradient steps reach a
    stable optimum (the seed argument is kept for interface symmetry)."""
    C = np.zeros((d, d))
    w = np.zeros(3)
    samples, skipped = coherence_design(caches)
    if not samples:
        raise DataError("no trainable mentions for coherence (gold labels required)")
    n = len(samples)
    history = []
    for _ in range(epochs):
        total = 0.0
        dC = np.zeros_like(C)
        dw = np.zeros_like(w)
        for s in samples:
            loss, gc, gw = coherence_loss_and_grads(C, w, s)
            total += loss
            dC += gc
            dw += gw
        nn.sgd_step([C, w], [dC / n, dw / n], lr)
        history.append(total / n)
    return C, w, {"loss": history, "skipped": skipped, "samples": n}
