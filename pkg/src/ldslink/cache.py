"""Per-document arrays binding a scored instance to the search kernels:
candidate ids mapped onto a unique-entity table, cached local scores, and
pairwise link features, so coherence tables for any weight setting are two
matrix products away."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import LinkingInstance
from .errors import DataError
from .kb import KnowledgeBase
from .local_model import gold_candidate_index, score_instance


@dataclass
class ScoredInstance:
    instance: LinkingInstance
    kb: KnowledgeBase
    ncand: np.ndarray  # (n,) int32
    cand_eid: np.ndarray  # (n, kmax) int64, -1 padded
    uid: np.ndarray  # (n, kmax) int32 rows into emb/pairfeat, 0 padded
    priors: np.ndarray  # (n, kmax) float64
    psi: np.ndarray  # (n, kmax) float64, -inf padded
    gold_cidx: np.ndarray  # (n,) int32, -1 when gold absent
    uniq_eids: list[int]
    emb: np.ndarray  # (u, d)
    pairfeat: np.ndarray  # (u, u, 3)
    half_window: int

    @property
    def n(self) -> int:
        return int(self.ncand.shape[0])

    @property
    def d(self) -> int:
        return int(self.emb.shape[1])

    def utab(self, C: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Pairwise coherence of unique entities under weights (C, w)."""
        return self.emb @ C @ self.emb.T + self.pairfeat @ w

    def psi_sum(self, assign: np.ndarray) -> float:
        return float(self.psi[np.arange(self.n), assign].sum())

    def local_argmax(self) -> np.ndarray:
        """Initial solution: per-mention best local score, ties to the
        lowest candidate index."""
        return np.argmax(self.psi, axis=1).astype(np.int32)

    def assigned_eids(self, assign: np.ndarray) -> np.ndarray:
        return self.cand_eid[np.arange(self.n), assign]

    def gold_eids(self) -> np.ndarray:
        """Gold entity id per active mention (-1 when unlabelled)."""
        out = np.full(self.n, -1, dtype=np.int64)
        for pos, mi in enumerate(self.instance.active):
            g = self.instance.document.mentions[mi].gold_entity
            if g is not None:
                out[pos] = g
        return out


def build_cache(
    instance: LinkingInstance, kb: KnowledgeBase, params, half_window: int | None = None
) -> ScoredInstance:
    """Score the instance (if not already cached) and assemble kernel arrays."""
    if instance.local_scores is None:
        score_instance(instance, kb, params)
    if not instance.active:
        raise DataError(f"document {instance.document.id} has no active mentions")
    hw = params.half_window if half_window is None else half_window
    n = instance.n_active
    kmax = max(len(instance.candidates[mi]) for mi in instance.active)
    ncand = np.zeros(n, dtype=np.int32)
    cand_eid = np.full((n, kmax), -1, dtype=np.int64)
    priors = np.zeros((n, kmax))
    psi = np.full((n, kmax), -np.inf)
    gold_cidx = np.full(n, -1, dtype=np.int32)
    uniq: dict[int, int] = {}
    uid = np.zeros((n, kmax), dtype=np.int32)
    for pos, mi in enumerate(instance.active):
        cands = instance.candidates[mi]
        ncand[pos] = len(cands)
        gold_cidx[pos] = gold_candidate_index(instance, mi)
        for j, c in enumerate(cands):
            cand_eid[pos, j] = c.entity_id
            priors[pos, j] = c.prior
            if c.entity_id not in uniq:
                uniq[c.entity_id] = len(uniq)
            uid[pos, j] = uniq[c.entity_id]
        psi[pos, : len(cands)] = instance.local_scores[pos]
    uniq_eids = list(uniq)
    u = len(uniq_eids)
    emb = np.stack([kb.entity(e).embedding for e in uniq_eids])
    pairfeat = np.zeros((u, u, 3))
    for a in range(u):
        for b in range(a, u):  # diagonal included: two mentions may share an entity
            f = kb.pair_features(uniq_eids[a], uniq_eids[b])
            pairfeat[a, b] = f
            pairfeat[b, a] = f
    return ScoredInstance(
        instance=instance,
        kb=kb,
        ncand=ncand,
        cand_eid=cand_eid,
        uid=uid,
        priors=priors,
        psi=psi,
        gold_cidx=gold_cidx,
        uniq_eids=uniq_eids,
        emb=emb,
        pairfeat=pairfeat,
        half_window=hw,
    )
