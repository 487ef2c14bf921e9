"""Collective solution scoring for beam pruning, hamming loss against
gold, ranking-pair construction, and margin-rank training of the pruner
weights. A solution's score is the sum of its cached local scores plus the
pairwise coherence of every unordered assigned pair whose mentions fall
inside each other's context window, under a dedicated weight set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, nn
from .cache import ScoredInstance
from .errors import DataError


@dataclass(frozen=True)
class PruneScore:
    local: float
    coherence: float

    @property
    def total(self) -> float:
        return self.local + self.coherence


@dataclass(frozen=True)
class RankingPair:
    better: tuple  # solution with the lower hamming loss
    worse: tuple
    delta: float  # absolute hamming difference


def hamming(cache: ScoredInstance, solution) -> int:
    """Number of active mentions whose assigned entity differs from gold."""
    golds = cache.gold_eids()
    if np.any(golds < 0):
        raise DataError("hamming loss requires gold labels on all active mentions")
    assigned = cache.assigned_eids(np.asarray(solution))
    return int((assigned != golds).sum())


def hamming_between(a, b) -> int:
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("assignments differ in length")
    return int((a != b).sum())


def prune_score(cache: ScoredInstance, solution, C_g: np.ndarray, w_g: np.ndarray, utab_g=None) -> PruneScore:
    sol = np.asarray(solution, dtype=np.int32)
    if utab_g is None:
        utab_g = cache.utab(C_g, w_g)
    coher = kernels.pair_sum(utab_g, cache.uid, sol, cache.half_window)
    return PruneScore(local=cache.psi_sum(sol), coherence=float(coher))


def make_ranking_pairs(solutions: list, hammings: list[int]) -> list[RankingPair]:
    """Pair the lowest-hamming solution (ties: first in expansion order)
    against every other; delta is the hamming difference."""
    if len(solutions) < 2:
        return []
    best = min(range(len(solutions)), key=lambda i: (hammings[i], i))
    return [
        RankingPair(
            better=tuple(int(x) for x in solutions[best]),
            worse=tuple(int(x) for x in solutions[i]),
            delta=float(abs(hammings[best] - hammings[i])),
        )
        for i in range(len(solutions))
        if i != best
    ]


def solution_summary(cache: ScoredInstance, solution) -> tuple[float, np.ndarray, np.ndarray]:
    """Sufficient statistics of a solution for the (linear) pruner weights:
    (psi sum, sum of embedding outer products over in-window pairs, sum of
    pairwise link features over the same pairs)."""
    sol = np.asarray(solution, dtype=np.int64)
    n = cache.n
    sel = cache.uid[np.arange(n), sol]
    E = cache.emb[sel]
    ee = np.zeros((cache.d, cache.d))
    rr = np.zeros(3)
    hw = cache.half_window
    for i in range(n):
        hi = min(n, i + hw + 1)
        for j in range(i + 1, hi):
            ee += np.outer(E[i], E[j])
            rr += cache.pairfeat[sel[i], sel[j]]
    return cache.psi_sum(sol), ee, rr


@dataclass
class PruneStep:
    """All complete solutions considered at one pruning step of a training
    search, reduced to their pruner sufficient statistics."""

    psi_sums: np.ndarray  # (s,)
    ee: np.ndarray  # (s, d, d)
    rr: np.ndarray  # (s, 3)
    hammings: np.ndarray  # (s,)

    @classmethod
    def from_solutions(cls, cache: ScoredInstance, solutions) -> "PruneStep":
        sums, ees, rrs, hams = [], [], [], []
        for sol in solutions:
            ps, ee, rr = solution_summary(cache, sol)
            sums.append(ps)
            ees.append(ee)
            rrs.append(rr)
            hams.append(hamming(cache, sol))
        return cls(np.array(sums), np.stack(ees), np.stack(rrs), np.array(hams))


def pruner_loss_and_grads(C_g: np.ndarray, w_g: np.ndarray, step: PruneStep):
    """Hinge ranking loss of one pruning step, summed over the pairs that
    rank the lowest-hamming solution above every other."""
    s = step.psi_sums + np.tensordot(step.ee, C_g, axes=([1, 2], [0, 1])) + step.rr @ w_g
    best = min(range(len(s)), key=lambda i: (step.hammings[i], i))
    loss = 0.0
    dC = np.zeros_like(C_g)
    dw = np.zeros_like(w_g)
    for i in range(len(s)):
        if i == best:
            continue
        delta = float(abs(step.hammings[best] - step.hammings[i]))
        l, d_t, d_f = nn.hinge_rank_loss(float(s[best]), float(s[i]), delta)
        if l > 0.0:
            loss += l
            dC += d_t * step.ee[best] + d_f * step.ee[i]
            dw += d_t * step.rr[best] + d_f * step.rr[i]
    return loss, dC, dw


def train_pruner(
    steps: list[PruneStep], d: int, epochs: int, lr: float, seed: int
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Rank-train the pruner weights on collected pruning steps; steps with
    fewer than two solutions are skipped."""
    rng = np.random.default_rng(seed)
    usable = [st for st in steps if len(st.psi_sums) >= 2]
    C_g = np.zeros((d, d))
    w_g = np.zeros(3)
    if not usable:
        return C_g, w_g, {"loss": [], "steps": 0, "skipped": len(steps)}
    history = []
    for _ in range(epochs):
        order = rng.permutation(len(usable))
        total = 0.0
        for idx in order:
            loss, dC, dw = pruner_loss_and_grads(C_g, w_g, usable[idx])
            if loss > 0.0:
                nn.sgd_step([C_g, w_g], [dC, dw], lr)
            total += loss
        history.append(total / len(usable))
    return C_g, w_g, {"loss": history, "steps": len(usable), "skipped": len(steps) - len(usable)}
