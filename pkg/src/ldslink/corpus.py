"""Documents, mentions, context extraction and candidate attachment.

Corpus format (`corpus.jsonl`): one document per line with id, tokens,
sentence ranges and mentions (span, optional gold entity id, optional
coreference chain id). Word embeddings live in `lexicon.jsonl`
(token -> embedding array).

Coreference here is a surface-match substitute: mentions share a chain iff
one case-folded surface equals, or is a token prefix/suffix of, the other,
closed transitively. Precomputed chain ids in the corpus file win over the
substitute when every mention carries one.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .kb import Candidate, KnowledgeBase, alias_lookup


@dataclass
class Mention:
    start: int
    end: int  # exclusive token index
    surface: str
    gold_entity: int | None = None
    coref_chain: int | None = None


@dataclass
class Document:
    id: str
    tokens: list[str]
    sentences: list[tuple[int, int]]
    mentions: list[Mention]

    def validate(self):
        n = len(self.tokens)
        for s, e in self.sentences:
            if not (0 <= s < e <= n):
                raise DataError(f"document {self.id}: sentence range ({s},{e}) out of bounds")
        prev = -1
        for m in self.mentions:
            if not (0 <= m.start < m.end <= n):
                raise DataError(f"document {self.id}: mention span ({m.start},{m.end}) out of bounds")
            if m.start < prev:
                raise DataError(f"document {self.id}: mentions not ordered by start position")
            prev = m.start
            joined = " ".join(self.tokens[m.start : m.end])
            if m.surface != joined:
                raise DataError(
                    f"document {self.id}: mention surface {m.surface!r} != span tokens {joined!r}"
                )


@dataclass
class LinkingInstance:
    """One document prepared for linking: contexts, candidate sets and the
    active-mention index (mentions with at least one candidate)."""

    document: Document
    contexts: list[np.ndarray | None]
    candidates: list[list[Candidate]]
    active: list[int]  # mention indices retained for search, document order
    d: int
    local_scores: list[np.ndarray] | None = None  # per active mention, filled by the local model

    @property
    def n_active(self) -> int:
        return len(self.active)

    def unlinkable(self) -> list[int]:
        return [i for i in range(len(self.document.mentions)) if i not in set(self.active)]


def _tokens_of(doc: Document, m: Mention) -> list[str]:
    return doc.tokens[m.start : m.end]


def build_coref_chains(document: Document) -> list[int]:
    """Chain id per mention. Two mentions share a chain iff one case-folded
    token sequence equals, or is a prefix or suffix of, the other;
    transitive closure applied. Returns dense ids in first-appearance order."""
    toks = [[t.casefold() for t in _tokens_of(document, m)] for m in document.mentions]
    n = len(toks)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    def related(a, b):
        if a == b:
            return True
        short, long_ = (a, b) if len(a) <= len(b) else (b, a)
        return long_[: len(short)] == short or long_[-len(short) :] == short

    for i in range(n):
        for j in range(i + 1, n):
            if related(toks[i], toks[j]):
                union(i, j)
    ids: dict[int, int] = {}
    out = []
    for i in range(n):
        root = find(i)
        if root not in ids:
            ids[root] = len(ids)
        out.append(ids[root])
    return out


def hash_embedding(token: str, d: int) -> np.ndarray:
    """Deterministic unit-norm pseudo-embedding for out-of-lexicon tokens."""
    seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "little")
    v = np.random.default_rng(seed).standard_normal(d)
    return v / np.linalg.norm(v)


def extract_context(
    document: Document,
    mention_idx: int,
    chains: list[int],
    lexicon: dict[str, np.ndarray],
    d: int,
) -> np.ndarray:
    """Embeddings of every token of every sentence containing a chain-mate
    of the mention, concatenated in document order. Out-of-lexicon tokens
    are dropped; an empty result falls back to the mention's own sentence,
    then to hash embeddings of the mention tokens themselves."""
    chain = chains[mention_idx]
    mates = [i for i, c in enumerate(chains) if c == chain]

    def sentence_of(m: Mention):
        for rng in document.sentences:
            if rng[0] <= m.start and m.end <= rng[1]:
                return rng
        return None

    picked: list[tuple[int, int]] = []
    for i in mates:
        rng = sentence_of(document.mentions[i])
        if rng is not None and rng not in picked:
            picked.append(rng)
    picked.sort()

    def embed(ranges):
        vecs = []
        for s, e in ranges:
            for tok in document.tokens[s:e]:
                v = lexicon.get(tok)
                if v is not None:
                    vecs.append(v)
        return vecs

    vecs = embed(picked)
    if not vecs:
        own = sentence_of(document.mentions[mention_idx])
        if own is not None:
            vecs = embed([own])
    if not vecs:
        vecs = [hash_embedding(t, d) for t in _tokens_of(document, document.mentions[mention_idx])]
    return np.stack(vecs)


def build_instance(
    document: Document,
    kb: KnowledgeBase,
    lexicon: dict[str, np.ndarray],
    k: int,
) -> LinkingInstance:
    """Attach contexts and top-k candidate sets; mentions whose surface has
    no alias entry are flagged unlinkable and excluded from search (but kept
    for evaluation denominators when they carry gold labels)."""
    document.validate()
    if all(m.coref_chain is not None for m in document.mentions) and document.mentions:
        chains = [int(m.coref_chain) for m in document.mentions]
    else:
        chains = build_coref_chains(document)
    contexts: list[np.ndarray | None] = []
    candidates: list[list[Candidate]] = []
    active: list[int] = []
    for i, m in enumerate(document.mentions):
        cands = alias_lookup(m.surface, k, kb.aliases)
        candidates.append(cands)
        if cands:
            active.append(i)
            contexts.append(extract_context(document, i, chains, lexicon, kb.d))
        else:
            contexts.append(None)
    return LinkingInstance(
        document=document, contexts=contexts, candidates=candidates, active=active, d=kb.d
    )


def load_corpus(path) -> list[Document]:
    if not os.path.exists(path):
        raise DataError(f"missing corpus file {path}")
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path} line {lineno}: invalid JSON ({exc})") from None
            tokens = list(rec["tokens"])
            mentions = [
                Mention(
                    start=int(sp[0]),
                    end=int(sp[1]),
                    surface=" ".join(tokens[int(sp[0]) : int(sp[1])]),
                    gold_entity=(int(m["gold"]) if m.get("gold") is not None else None),
                    coref_chain=(int(m["chain"]) if m.get("chain") is not None else None),
                )
                for m in rec["mentions"]
                for sp in [m["span"]]
            ]
            doc = Document(
                id=str(rec["id"]),
                tokens=tokens,
                sentences=[(int(s), int(e)) for s, e in rec["sentences"]],
                mentions=mentions,
            )
            doc.validate()
            docs.append(doc)
    return docs


def save_corpus(docs: list[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            rec = {
                "id": doc.id,
                "tokens": doc.tokens,
                "sentences": [list(s) for s in doc.sentences],
                "mentions": [
                    {
                        "span": [m.start, m.end],
                        "gold": m.gold_entity,
                        "chain": m.coref_chain,
                    }
                    for m in doc.mentions
                ],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_lexicon(path) -> dict[str, np.ndarray]:
    if not os.path.exists(path):
        raise DataError(f"missing lexicon file {path}")
    lex: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            lex[rec["token"]] = np.asarray(rec["embedding"], dtype=np.float64)
    return lex


def save_lexicon(lexicon: dict[str, np.ndarray], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok in sorted(lexicon):
            fh.write(
                json.dumps({"token": tok, "embedding": [float(x) for x in lexicon[tok]]}) + "\n"
            )
