"""Seeded generator of synthetic knowledge bases and corpora with
controllable ambiguity and coherence, standing in for real benchmark data
at desk scale.

Construction: entities cluster into topics (round-robin by id). Links and
co-occurrence counts are denser within a topic in proportion to the
coherence strength gamma. Every entity is the primary sense of exactly one
surface whose remaining senses come from *other* topics, so candidate sets
are cross-topic and picking the right candidate amounts to identifying the
topic. Documents sample a topic; each mention's gold entity is drawn from
that topic with probability gamma; its sentence carries words indicative
of gold's topic, each replaced with a word from a wrong topic with
probability `noise`. Surface/title strings are decorrelated through a
seeded permutation so lexical features carry no shortcut to gold.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from .corpus import Document, Mention
from .kb import Candidate, Entity, KnowledgeBase, sort_alias_row


@dataclass(frozen=True)
class SynthConfig:
    d: int = 16
    n_entities: int = 200
    n_topics: int = 8
    n_docs: int = 120
    mentions_per_doc: int = 12
    cands_per_surface: int = 4
    gamma: float = 0.8  # coherence strength
    prior_sharpness: float = 1.0 / 3.0  # Dirichlet concentration reciprocal: flatter base priors
    noise: float = 0.3
    seed: int = 0
    # generator internals
    words_per_topic: int = 30
    noise_words: int = 120
    context_words: int = 14
    adversarial_noise: float = 0.02  # share of noise draws from wrong topics
    primary_prior_boost: float = 1.0  # extra prior mass on a surface's primary sense
    primary_surface_rate: float = 0.72  # how often a mention uses gold's dominant surface
    hard_primary_surface_rate: float = 0.3  # the same rate inside hard documents
    off_clique_primary_rate: float = 0.9  # dominant-surface rate for golds outside the doc cliques
    confusable_rate: float = 0.32  # single-token aliases with a same-topic sibling sense
    confusable_sibling_boost: float = 1.5  # prior mass tilted to the sibling (rare-sense golds)
    clique_size: int = 5  # entities per within-topic clique (link/co-occurrence unit)
    cliques_per_doc: int = 2  # cliques a document draws its coherent golds from
    hard_doc_rate: float = 0.04  # fraction of documents with heavy word noise
    hard_doc_factor: float = 2.8
    links_per_entity: int = 8
    link_clique_frac: float = 0.7  # coherent link draws that stay inside the clique
    cooccur_base: float = 0.3
    cooccur_boost: float = 6.0  # same-clique intensity (scaled by gamma)
    cooccur_topic_boost: float = 0.8  # same-topic, different-clique intensity
    entity_spread: float = 0.4
    word_spread: float = 0.35

    def validate(self):
        if min(self.d, self.n_entities, self.n_topics, self.n_docs, self.mentions_per_doc, self.cands_per_surface) < 1:
            raise ValueError("all counts must be >= 1")
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.noise <= 1.0):
            raise ValueError("gamma and noise must be in [0, 1]")
        if self.cands_per_surface > self.n_entities:
            raise ValueError("more candidates per surface than entities")


def topic_of(eid: int, config: SynthConfig) -> int:
    return eid % config.n_topics


def clique_of(eid: int, config: SynthConfig) -> tuple[int, int]:
    """Clique key: (topic, block index within the topic)."""
    return topic_of(eid, config), (eid // config.n_topics) // config.clique_size


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def gen_kb(config: SynthConfig) -> tuple[KnowledgeBase, dict[str, np.ndarray]]:
    """Build the KB (entities, links, co-occurrences, aliases) and the word
    lexicon. Deterministic in config.seed."""
    config.validate()
    rng = np.random.default_rng([config.seed, 0])
    T, N = config.n_topics, config.n_entities
    centroids = np.stack([_unit(rng.standard_normal(config.d)) for _ in range(T)])
    topics = [topic_of(e, config) for e in range(N)]
    emb = np.stack(
        [_unit(centroids[topics[e]] + config.entity_spread * rng.standard_normal(config.d)) for e in range(N)]
    )
    by_topic = [[e for e in range(N) if topics[e] == t] for t in range(T)]
    cliques = [clique_of(e, config) for e in range(N)]
    by_clique: dict[tuple[int, int], list[int]] = {}
    for e in range(N):
        by_clique.setdefault(cliques[e], []).append(e)

    out_links: list[set[int]] = [set() for _ in range(N)]
    for e in range(N):
        for _ in range(config.links_per_entity):
            if rng.random() < config.gamma:
                pool = (
                    by_clique[cliques[e]]
                    if rng.random() < config.link_clique_frac
                    else by_topic[topics[e]]
                )
            else:
                pool = range(N)
            tgt = int(rng.choice(np.asarray(pool)))
            if tgt != e:
                out_links[e].add(tgt)
    in_links: list[set[int]] = [set() for _ in range(N)]
    for e, outs in enumerate(out_links):
        for tgt in outs:
            in_links[tgt].add(e)

    cooccur: dict[tuple[int, int], int] = {}
    for a in range(N):
        for b in range(a + 1, N):
            if cliques[a] == cliques[b]:
                boost = config.cooccur_boost
            elif topics[a] == topics[b]:
                boost = config.cooccur_topic_boost
            else:
                boost = 0.0
            lam = config.cooccur_base + config.gamma * boost
            c = int(rng.poisson(lam))
            if c > 0:
                cooccur[(a, b)] = c

    # surface index -> primary entity through a permutation, so surface and
    # title strings share no digit pattern a lexical feature could exploit.
    # Every entity gets a two-token dominant surface (sharp prior, like a
    # full name) and single-token ambiguous aliases with flat priors.
    aliases: dict[str, list[Candidate]] = {}

    def alias_row(primary: int, boost: float, confusable: bool = False) -> list[Candidate]:
        # at most one sense per topic, so context topic evidence resolves the
        # rest; a confusable row adds a dominant same-topic sibling from
        # another clique, making the primary a rare sense whose context ties
        # with the sibling and only relational coherence can separate
        members = [primary]
        sibling_boost = 0.0
        if confusable:
            siblings = [
                e
                for e in by_topic[topics[primary]]
                if cliques[e] != cliques[primary]
            ]
            if siblings:
                members.append(int(rng.choice(np.asarray(siblings))))
                sibling_boost = config.confusable_sibling_boost
        other_topics = rng.choice(
            np.asarray([t for t in range(T) if t != topics[primary]]),
            size=min(config.cands_per_surface - len(members), T - 1),
            replace=False,
        )
        members += [int(rng.choice(np.asarray(by_topic[int(t)]))) for t in other_topics]
        while len(members) < config.cands_per_surface:  # more senses than topics
            extra = int(rng.integers(N))
            if extra not in members:
                members.append(extra)
        alpha = np.full(config.cands_per_surface, 1.0 / config.prior_sharpness)
        priors = rng.dirichlet(alpha)
        priors[0] += boost
        if sibling_boost:
            priors[1] += sibling_boost
        priors /= priors.sum()
        return sort_alias_row(
            [Candidate(members[i], float(priors[i])) for i in range(len(members))]
        )

    # alias-name assignments come from their own streams so the corpus
    # generator can reproduce them without touching this generator's draws
    perm = np.random.default_rng([config.seed, 3]).permutation(N)
    for s in range(N):
        aliases[f"m{s:03d} x{s:03d}"] = alias_row(int(perm[s]), config.primary_prior_boost)
    perm2 = np.random.default_rng([config.seed, 2]).permutation(N)
    for s in range(N):
        confusable = rng.random() < config.confusable_rate
        aliases[f"a{s:03d}"] = alias_row(int(perm2[s]), 0.0, confusable=confusable)

    entities = {
        e: Entity(
            id=e,
            title=(f"T{e:03d}",),
            embedding=emb[e],
            in_links=frozenset(in_links[e]),
            out_links=frozenset(out_links[e]),
        )
        for e in range(N)
    }
    kb = KnowledgeBase(d=config.d, entities=entities, aliases=aliases, cooccur=cooccur)

    lexicon: dict[str, np.ndarray] = {}
    for t in range(T):
        for j in range(config.words_per_topic):
            lexicon[f"t{t}w{j:02d}"] = _unit(
                centroids[t] + config.word_spread * rng.standard_normal(config.d)
            )
    for j in range(config.noise_words):
        lexicon[f"q{j:03d}"] = _unit(rng.standard_normal(config.d))
    return kb, lexicon


_TOPIC_WORD = re.compile(r"^t(\d+)w(\d+)$")
_NOISE_WORD = re.compile(r"^q(\d+)$")


def _topic_words(lexicon: dict[str, np.ndarray]) -> dict[int, list[str]]:
    words: dict[int, list[str]] = {}
    for tok in sorted(lexicon):
        m = _TOPIC_WORD.match(tok)
        if m:
            words.setdefault(int(m.group(1)), []).append(tok)
    return words


def _noise_words(lexicon: dict[str, np.ndarray]) -> list[str]:
    return [tok for tok in sorted(lexicon) if _NOISE_WORD.match(tok)]


def gen_corpus(config: SynthConfig, kb: KnowledgeBase, lexicon: dict[str, np.ndarray]) -> list[Document]:
    """Documents with gold labels; deterministic in config.seed. Gold is
    always among its surface's senses by construction (the candidate cap
    must be >= cands_per_surface for downstream lookups to keep it)."""
    config.validate()
    rng = np.random.default_rng([config.seed, 1])
    # mentions use the surfaces an entity owns: its two-token full name or
    # its own single-token short alias (never a name it does not own)
    perm = np.random.default_rng([config.seed, 3]).permutation(config.n_entities)
    perm2 = np.random.default_rng([config.seed, 2]).permutation(config.n_entities)
    dominant = {int(perm[s]): f"m{s:03d} x{s:03d}" for s in range(config.n_entities)}
    ambiguous = {int(perm2[s]): [f"a{s:03d}"] for s in range(config.n_entities)}
    topic_words = _topic_words(lexicon)
    noise_vocab = _noise_words(lexicon)
    T = config.n_topics
    docs = []
    clique_ids = sorted({clique_of(e, config) for e in range(config.n_entities)})
    members: dict[tuple[int, int], list[int]] = {}
    for e in range(config.n_entities):
        members.setdefault(clique_of(e, config), []).append(e)
    for di in range(config.n_docs):
        doc_topic = int(rng.integers(T))
        topic_cliques = [c for c in clique_ids if c[0] == doc_topic]
        picks = rng.choice(
            len(topic_cliques), size=min(config.cliques_per_doc, len(topic_cliques)), replace=False
        )
        coherent_pool = sorted(e for i in picks for e in members[topic_cliques[int(i)]])
        noise = config.noise
        primary_rate = config.primary_surface_rate
        if rng.random() < config.hard_doc_rate:
            noise = min(0.9, noise * config.hard_doc_factor)
            primary_rate = config.hard_primary_surface_rate
        tokens: list[str] = []
        sentences: list[tuple[int, int]] = []
        mentions: list[Mention] = []
        for _ in range(config.mentions_per_doc):
            if rng.random() < config.gamma:
                pool = coherent_pool
            else:
                pool = list(range(config.n_entities))
            gold = int(rng.choice(np.asarray(pool)))
            # entities appearing outside their own cliques mostly keep their
            # established full name; coherence should not be asked to flip them
            rate = primary_rate if gold in coherent_pool else config.off_clique_primary_rate
            if rng.random() < rate:
                surface = dominant[gold]
            else:
                surface = str(rng.choice(ambiguous[gold]))
            gold_topic = topic_of(gold, config)
            sent = list(surface.split(" "))
            surface_len = len(sent)
            for _ in range(config.context_words):
                if rng.random() < noise:
                    # noise is mostly neutral vocabulary, sometimes misleading
                    if noise_vocab and rng.random() >= config.adversarial_noise:
                        sent.append(str(rng.choice(noise_vocab)))
                    else:
                        wrong = (gold_topic + 1 + int(rng.integers(T - 1))) % T if T > 1 else gold_topic
                        sent.append(str(rng.choice(topic_words[wrong])))
                else:
                    sent.append(str(rng.choice(topic_words[gold_topic])))
            start = len(tokens)
            tokens.extend(sent)
            sentences.append((start, len(tokens)))
            mentions.append(
                Mention(start=start, end=start + surface_len, surface=surface, gold_entity=gold)
            )
        doc = Document(id=f"synth{config.seed}-{di:04d}", tokens=tokens, sentences=sentences, mentions=mentions)
        doc.validate()
        docs.append(doc)
    return docs


def split_docs(docs: list[Document]) -> dict[str, list[Document]]:
    """Train/dev/test split disjoint by document id: the last third is
    halved into dev and test (80/20/20 at the 120-document preset)."""
    n = len(docs)
    n_dev = n // 6
    n_test = n // 6
    n_train = n - n_dev - n_test
    return {
        "train": docs[:n_train],
        "dev": docs[n_train : n_train + n_dev],
        "test": docs[n_train + n_dev :],
    }


def generate(config: SynthConfig):
    """Full dataset: (kb, lexicon, {"train": docs, "dev": docs, "test": docs})."""
    kb, lexicon = gen_kb(config)
    docs = gen_corpus(config, kb, lexicon)
    return kb, lexicon, split_docs(docs)


def small_config(**overrides) -> SynthConfig:
    """Reduced preset for fast tests and oracle guards."""
    base = SynthConfig(
        d=8,
        n_entities=48,
        n_topics=4,
        n_docs=12,
        mentions_per_doc=4,
        cands_per_surface=3,
        words_per_topic=12,
    )
    return replace(base, **overrides)
