"""Shared fixtures: a tiny hand-built KB and helpers for constructing
score caches directly from arrays (no corpus machinery)."""

from __future__ import annotations

import numpy as np
import pytest

from ldslink.cache import ScoredInstance
from ldslink.corpus import Document, LinkingInstance, Mention
from ldslink.kb import Candidate, Entity, KnowledgeBase, sort_alias_row


def make_kb(d=2, n=6, links=None, cooccur=None, aliases=None, embeddings=None):
    """Small KB; entity e gets embedding e_i = unit basis (cycled) unless given."""
    entities = {}
    for e in range(n):
        emb = embeddings[e] if embeddings is not None else np.eye(d)[e % d]
        out = frozenset(links.get(e, ()) if links else ())
        entities[e] = Entity(id=e, title=(f"T{e}",), embedding=np.asarray(emb, float), in_links=frozenset(), out_links=out)
    # rebuild in_links as the inverse of out_links
    inv = {e: set() for e in range(n)}
    for e, ent in entities.items():
        for tgt in ent.out_links:
            inv[tgt].add(e)
    entities = {
        e: Entity(id=e, title=ent.title, embedding=ent.embedding, in_links=frozenset(inv[e]), out_links=ent.out_links)
        for e, ent in entities.items()
    }
    alias_map = {}
    for surface, row in (aliases or {}).items():
        alias_map[surface] = sort_alias_row([Candidate(eid, p) for eid, p in row])
    co = {}
    for (a, b), c in (cooccur or {}).items():
        co[(min(a, b), max(a, b))] = c
    return KnowledgeBase(d=d, entities=entities, aliases=alias_map, cooccur=co)


def make_cache(
    kb: KnowledgeBase,
    cand_eids: list[list[int]],
    psi: list[list[float]],
    golds: list[int | None] = None,
    priors: list[list[float]] | None = None,
    half_window: int = 15,
) -> ScoredInstance:
    """Hand-build a ScoredInstance from explicit candidate ids and local scores."""
    n = len(cand_eids)
    golds = golds if golds is not None else [None] * n
    kmax = max(len(c) for c in cand_eids)
    ncand = np.array([len(c) for c in cand_eids], dtype=np.int32)
    cand_eid = np.full((n, kmax), -1, dtype=np.int64)
    uid = np.zeros((n, kmax), dtype=np.int32)
    psi_arr = np.full((n, kmax), -np.inf)
    prior_arr = np.zeros((n, kmax))
    gold_cidx = np.full(n, -1, dtype=np.int32)
    uniq: dict[int, int] = {}
    for i, row in enumerate(cand_eids):
        for j, e in enumerate(row):
            cand_eid[i, j] = e
            if e not in uniq:
                uniq[e] = len(uniq)
            uid[i, j] = uniq[e]
            psi_arr[i, j] = psi[i][j]
            if priors is not None:
                prior_arr[i, j] = priors[i][j]
            if golds[i] is not None and e == golds[i]:
                gold_cidx[i] = j
    uniq_eids = list(uniq)
    u = len(uniq_eids)
    emb = np.stack([kb.entity(e).embedding for e in uniq_eids])
    pairfeat = np.zeros((u, u, 3))
    for a in range(u):
        for b in range(a, u):
            f = kb.pair_features(uniq_eids[a], uniq_eids[b])
            pairfeat[a, b] = f
            pairfeat[b, a] = f
    # stub document so gold_eids() and hamming() work
    tokens = [f"tok{i}" for i in range(n)]
    mentions = [
        Mention(start=i, end=i + 1, surface=tokens[i], gold_entity=golds[i]) for i in range(n)
    ]
    doc = Document(id="hand", tokens=tokens, sentences=[(0, n)], mentions=mentions)
    inst = LinkingInstance(
        document=doc,
        contexts=[None] * n,
        candidates=[[Candidate(int(e), float(prior_arr[i, j])) for j, e in enumerate(row)] for i, row in enumerate(cand_eids)],
        active=list(range(n)),
        d=kb.d,
        local_scores=[np.asarray(p, float) for p in psi],
    )
    return ScoredInstance(
        instance=inst,
        kb=kb,
        ncand=ncand,
        cand_eid=cand_eid,
        uid=uid,
        priors=prior_arr,
        psi=psi_arr,
        gold_cidx=gold_cidx,
        uniq_eids=uniq_eids,
        emb=emb,
        pairfeat=pairfeat,
        half_window=half_window,
    )


def full_params(cache, C, w, C_g, w_g, h2_constant=None):
    """ModelParams satisfying every stage requirement for search tests
    (the local MLP itself is never consulted once psi is cached)."""
    from ldslink.nn import Mlp
    from ldslink.params import ModelParams

    d = cache.d
    p = ModelParams(d=d)
    p.A = np.zeros((d, d))
    p.B = np.zeros((d, d))
    p.local_mlp = Mlp.create([3, 1], ["sigmoid"], np.random.default_rng(0))
    p.C, p.w = np.asarray(C, float), np.asarray(w, float)
    p.C_g, p.w_g = np.asarray(C_g, float), np.asarray(w_g, float)
    p.h2_constant = h2_constant
    return p


@pytest.fixture
def tiny_kb():
    return make_kb(
        d=2,
        n=6,
        links={0: {1, 2}, 1: {0, 2}, 3: {4}, 4: {3}},
        cooccur={(0, 1): 3, (0, 2): 1, (3, 4): 5},
        aliases={
            "alpha": [(0, 0.6), (1, 0.3), (2, 0.1)],
            "beta": [(3, 0.5), (4, 0.5)],
        },
    )


def random_params_cache(seed=0, n=3, k=2, d=4, half_window=15, golds=False):
    """Random hand cache plus random coherence/pruner weights for search tests."""
    rng = np.random.default_rng(seed)
    n_ent = n * k + 2
    links = {e: set(int(x) for x in rng.integers(0, n_ent, 3) if int(x) != e) for e in range(n_ent)}
    co = {}
    for a in range(n_ent):
        for b in range(a + 1, n_ent):
            if rng.random() < 0.4:
                co[(a, b)] = int(rng.integers(1, 6))
    emb = {e: rng.standard_normal(d) for e in range(n_ent)}
    kb = make_kb(d=d, n=n_ent, links=links, cooccur=co, embeddings=emb)
    cand_eids = []
    pool = rng.permutation(n_ent)
    pos = 0
    for i in range(n):
        cand_eids.append([int(pool[pos + j]) for j in range(k)])
        pos += k
    psi = rng.random((n, k)).tolist()
    gold_list = [cand_eids[i][int(rng.integers(k))] for i in range(n)] if golds else None
    cache = make_cache(kb, cand_eids, psi, golds=gold_list, half_window=half_window)
    C = rng.standard_normal((d, d)) * 0.4
    w = rng.standard_normal(3) * 0.4
    C_g = rng.standard_normal((d, d)) * 0.4
    w_g = rng.standard_normal(3) * 0.4
    return cache, (C, w, C_g, w_g)
