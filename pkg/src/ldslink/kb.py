"""Knowledge base: entities with embeddings and link structure, alias
priors, pairwise co-occurrence counts, and the on-disk directory format.

Directory layout (all UTF-8 text, decimal numbers):
    meta.json       {"format_version": 1, "d": <embedding dim>}
    entities.jsonl  one record per entity: id, title, embedding, in_links, out_links
    aliases.tsv     surface <TAB> entity_id <TAB> prior
    cooccur.tsv     id <TAB> id <TAB> count   (each unordered pair once)

A loaded KnowledgeBase is immutable and safe for concurrent readers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DataError

FORMAT_VERSION = 1


class Candidate(NamedTuple):
    entity_id: int
    prior: float


@dataclass(frozen=True)
class Entity:
    id: int
    title: tuple[str, ...]
    embedding: np.ndarray
    in_links: frozenset[int]
    out_links: frozenset[int]


class KnowledgeBase:
    def __init__(
        self,
        d: int,
        entities: dict[int, Entity],
        aliases: dict[str, list[Candidate]],
        cooccur: dict[tuple[int, int], int],
    ):
        self.d = d
        self.entities = entities
        self.aliases = aliases
        self.cooccur = cooccur
        self._validate()

    def _validate(self):
        if not self.entities:
            raise DataError("KB contains no entities")
        for e in self.entities.values():
            if not e.title:
                raise DataError(f"entity {e.id} has an empty title")
            if e.embedding.shape != (self.d,):
                raise DataError(
                    f"entity {e.id} embedding has length {e.embedding.shape[0]}, expected d={self.d}"
                )
            for linked in e.in_links | e.out_links:
                if linked not in self.entities:
                    raise DataError(f"entity {e.id} links to unknown entity id {linked}")
        for surface, cands in self.aliases.items():
            total = 0.0
            prev = math.inf
            for c in cands:
                if c.entity_id not in self.entities:
                    raise DataError(
                        f"alias {surface!r} references unknown entity id {c.entity_id}"
                    )
                if c.prior > prev + 1e-12:
                    raise DataError(f"alias {surface!r} priors are not sorted descending")
                prev = c.prior
                total += c.prior
            if total > 1.0 + 1e-9:
                raise DataError(f"alias {surface!r} priors sum to {total} > 1")
        for (a, b), count in self.cooccur.items():
            if a > b:
                raise DataError("co-occurrence keys must be stored as (min, max)")
            if count < 0:
                raise DataError(f"negative co-occurrence count for pair ({a}, {b})")
            if a not in self.entities or b not in self.entities:
                raise DataError(f"co-occurrence pair ({a}, {b}) references unknown entity")

    def entity(self, eid: int) -> Entity:
        try:
            return self.entities[eid]
        except KeyError:
            raise DataError(f"unknown entity id {eid}") from None

    def cooccur_count(self, a: int, b: int) -> int:
        key = (a, b) if a <= b else (b, a)
        return self.cooccur.get(key, 0)

    def pair_features(self, a: int, b: int) -> np.ndarray:
        """log(1 + count) of co-occurrences, shared in-links, shared out-links."""
        ea, eb = self.entity(a), self.entity(b)
        return np.array(
            [
                math.log1p(self.cooccur_count(a, b)),
                math.log1p(len(ea.in_links & eb.in_links)),
                math.log1p(len(ea.out_links & eb.out_links)),
            ]
        )


def pair_features(a: int, b: int, kb: KnowledgeBase) -> np.ndarray:
    return kb.pair_features(a, b)


def sort_alias_row(cands: list[Candidate]) -> list[Candidate]:
    """Descending prior; ties broken by ascending entity id."""
    return sorted(cands, key=lambda c: (-c.prior, c.entity_id))


def alias_lookup(surface: str, k: int, aliases: dict[str, list[Candidate]]) -> list[Candidate]:
    """Top k candidates for an exact surface match; empty when unknown."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return list(aliases.get(surface, ())[:k])


def load_kb(path) -> KnowledgeBase:
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise DataError(f"missing KB file {meta_path}")
    meta = json.loads(meta_path.read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported KB format version {meta.get('format_version')}")
    d = int(meta["d"])

    entities: dict[int, Entity] = {}
    ent_path = path / "entities.jsonl"
    if not ent_path.exists():
        raise DataError(f"missing KB file {ent_path}")
    with open(ent_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            eid = int(rec["id"])
            if eid in entities:
                raise DataError(f"entities.jsonl line {lineno}: duplicate entity id {eid}")
            entities[eid] = Entity(
                id=eid,
                title=tuple(rec["title"]),
                embedding=np.asarray(rec["embedding"], dtype=np.float64),
                in_links=frozenset(int(x) for x in rec.get("in_links", ())),
                out_links=frozenset(int(x) for x in rec.get("out_links", ())),
            )
    if not entities:
        raise DataError("KB contains no entities")

    aliases: dict[str, list[Candidate]] = {}
    ali_path = path / "aliases.tsv"
    if not ali_path.exists():
        raise DataError(f"missing KB file {ali_path}")
    with open(ali_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"aliases.tsv line {lineno}: expected 3 tab-separated fields")
            surface, eid_s, prior_s = parts
            eid = int(eid_s)
            if eid not in entities:
                raise DataError(f"aliases.tsv line {lineno}: unknown entity id {eid}")
            aliases.setdefault(surface, []).append(Candidate(eid, float(prior_s)))
    aliases = {s: sort_alias_row(c) for s, c in aliases.items()}

    cooccur: dict[tuple[int, int], int] = {}
    co_path = path / "cooccur.tsv"
    if not co_path.exists():
        raise DataError(f"missing KB file {co_path}")
    with open(co_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"cooccur.tsv line {lineno}: expected 3 tab-separated fields")
            a, b, count = int(parts[0]), int(parts[1]), int(parts[2])
            key = (a, b) if a <= b else (b, a)
            if key in cooccur and cooccur[key] != count:
                raise DataError(f"cooccur.tsv line {lineno}: conflicting count for pair {key}")
            cooccur[key] = count

    return KnowledgeBase(d=d, entities=entities, aliases=aliases, cooccur=cooccur)


def save_kb(kb: KnowledgeBase, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "meta.json").write_text(
        json.dumps({"format_version": FORMAT_VERSION, "d": kb.d}, sort_keys=True) + "\n"
    )
    with open(path / "entities.jsonl", "w", encoding="utf-8") as fh:
        for eid in sorted(kb.entities):
            e = kb.entities[eid]
            fh.write(
                json.dumps(
                    {
                        "id": e.id,
                        "title": list(e.title),
                        "embedding": [float(x) for x in e.embedding],
                        "in_links": sorted(e.in_links),
                        "out_links": sorted(e.out_links),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    with open(path / "aliases.tsv", "w", encoding="utf-8") as fh:
        for surface in sorted(kb.aliases):
            for c in kb.aliases[surface]:
                fh.write(f"{surface}\t{c.entity_id}\t{c.prior!r}\n")
    with open(path / "cooccur.tsv", "w", encoding="utf-8") as fh:
        for a, b in sorted(kb.cooccur):
            fh.write(f"{a}\t{b}\t{kb.cooccur[(a, b)]}\n")
