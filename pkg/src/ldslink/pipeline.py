"""End-to-end wiring: dataset loading, the five-stage training schedule,
document linking, evaluation reports, ablation grids, and the tiny-instance
oracle equivalence suite. Documents are independent at inference time, so
linking and evaluation optionally fan out over a process pool."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import coherence as coh
from . import heuristics as heur
from . import local_model as lm
from . import nn
from . import oracle as orc
from . import pruner as prn
from .cache import ScoredInstance, build_cache
from .corpus import LinkingInstance, build_instance
from .errors import DataError
from .evalrep import EvalReport, heuristic_confusion, micro_accuracy, rarity_analysis
from .kb import KnowledgeBase
from .params import STAGES, ModelParams
from .search import SearchConfig, run_baselines, search
from .synth import SynthConfig, generate

DEFAULT_GRID = (
    ("h1", "25", 1),
    ("h1", "25", 5),
    ("h1", "50", 5),
    ("h2", "flex", 5),
)


@dataclass(frozen=True)
class TrainConfig:
    k: int = 5  # candidate cap per mention
    half_window: int = 15
    attention_epochs: int = 6
    attention_lr: float = 0.05
    mlp_epochs: int = 12
    mlp_lr: float = 0.03
    dropout: float = 0.7
    coherence_epochs: int = 80
    coherence_lr: float = 2.0
    h2_epochs: int = 80
    h2_lr: float = 0.03
    pruner_epochs: int = 4
    pruner_lr: float = 2e-4
    collect_beam: int = 5
    pruner_seed_grid: tuple = (0.2, 0.4, 0.7, 1.0, 1.5)  # propagator-weight scales tried


def build_instances(docs, kb: KnowledgeBase, lexicon, k: int) -> list[LinkingInstance]:
    return [build_instance(doc, kb, lexicon, k) for doc in docs]


def build_caches(instances, kb: KnowledgeBase, params: ModelParams) -> list[ScoredInstance]:
    return [build_cache(inst, kb, params) for inst in instances if inst.active]


def train_stages(
    kb: KnowledgeBase,
    instances: list[LinkingInstance],
    cfg: TrainConfig,
    seed: int,
    stages=STAGES,
    params: ModelParams | None = None,
) -> tuple[ModelParams, dict]:
    """Run the requested training stages in canonical order on top of
    `params` (fresh when None). Each stage checks its prerequisites."""
    requested = set(stages)
    unknown = requested - set(STAGES)
    if unknown:
        raise ValueError(f"unknown training stages: {sorted(unknown)}")
    stages = [s for s in STAGES if s in requested]
    if params is None:
        params = ModelParams(d=kb.d, half_window=cfg.half_window, dropout=cfg.dropout)
    reports: dict = {}
    caches: list[ScoredInstance] | None = None

    def scored_caches():
        nonlocal caches
        if caches is None:
            params.require("local-mlp")
            caches = build_caches(instances, kb, params)
        return caches

    for stage in stages:
        if stage == "attention":
            A, B, rep = lm.pretrain_attention(
                instances, kb, cfg.attention_epochs, cfg.attention_lr, seed
            )
            params.A, params.B = A, B
        elif stage == "local-mlp":
            params.require("attention")
            params.lex_binners, params.prior_binner = lm.fit_feature_binners(instances, kb)
            mlp, rep = lm.train_local_mlp(
                instances, kb, params, cfg.mlp_epochs, cfg.mlp_lr, cfg.dropout, seed
            )
            params.local_mlp = mlp
        elif stage == "coherence":
            C, w, rep = coh.train_coherence(
                scored_caches(), kb.d, cfg.coherence_epochs, cfg.coherence_lr, seed
            )
            params.C, params.w = C, w
        elif stage == "h2":
            mlp, binners, const, rep = heur.train_h2(
                scored_caches(), cfg.h2_epochs, cfg.h2_lr, seed
            )
            params.h2_mlp, params.h2_binners, params.h2_constant = mlp, binners, const
        elif stage == "pruner":
            params.require("coherence")
            rep = train_pruner_stage(scored_caches(), params, cfg, seed)
        reports[stage] = rep
    return params, reports


def _search_accuracy(caches, params: ModelParams, config: SearchConfig) -> float:
    correct = total = 0
    for cache in caches:
        sol, _ = search(cache, config, params)
        correct += int((cache.assigned_eids(sol) == cache.gold_eids()).sum())
        total += cache.n
    return correct / total if total else 0.0


def train_pruner_stage(
    caches: list[ScoredInstance], params: ModelParams, cfg: TrainConfig, seed: int
) -> dict:
    """Pruner weights: seed with the trained propagator weights rescaled to
    the pair-sum form (scale chosen by training-document search accuracy),
    then rank-train on collected pruning steps, keeping the checkpoint that
    links the training documents best."""
    gold_caches = [c for c in caches if not np.any(c.gold_eids() < 0)]
    rep: dict = {"gold_docs": len(gold_caches)}
    if not gold_caches:
        params.C_g = np.zeros((params.d, params.d))
        params.w_g = np.zeros(3)
        rep["warning"] = "no gold-labelled documents; pruner left at zero"
        return rep
    if "h2" in params.stages_done():
        select_cfg = SearchConfig(beam=cfg.collect_beam, branch_k=cfg.k, heuristic="h2", depth_mode="flex")
    else:
        select_cfg = SearchConfig(beam=cfg.collect_beam, branch_k=cfg.k, heuristic="h1", depth_mode="25")
    # the propagator averages coherence over |E_i| context entities while the
    # pruning score sums over in-window pairs; undo that scale mismatch
    base = 1.0 / float(np.mean([min(c.n - 1, 2 * c.half_window) for c in gold_caches]))
    best = None
    for mult in cfg.pruner_seed_grid:
        params.C_g, params.w_g = mult * base * params.C, mult * base * params.w
        acc = _search_accuracy(gold_caches, params, select_cfg)
        if best is None or acc > best[0]:
            best = (acc, mult)
    rep["seed_scale"] = best[1] * base
    params.C_g = best[1] * base * params.C
    params.w_g = best[1] * base * params.w

    # rank training on steps from most documents, checkpoint choice on the
    # held-out rest; ties favour the earliest (least-drifted) checkpoint
    holdout = gold_caches[::5]
    fit = [c for i, c in enumerate(gold_caches) if i % 5 != 0] or holdout
    steps, collect_rep = collect_prune_steps(fit, params, cfg, seed)
    rep.update(collect_rep)
    usable = [st for st in steps if len(st.psi_sums) >= 2]
    rep["usable_steps"] = len(usable)
    C_g, w_g = params.C_g.copy(), params.w_g.copy()
    checkpoints = [(_search_accuracy(holdout, params, select_cfg), 0, C_g.copy(), w_g.copy())]
    rng = np.random.default_rng(seed)
    history = []
    for epoch in range(1, cfg.pruner_epochs + 1):
        total = 0.0
        for i in rng.permutation(len(usable)):
            loss, dC, dw = prn.pruner_loss_and_grads(C_g, w_g, usable[i])
            if loss > 0.0:
                nn.sgd_step([C_g, w_g], [dC, dw], cfg.pruner_lr)
            total += loss
        history.append(total / max(len(usable), 1))
        params.C_g, params.w_g = C_g, w_g
        acc = _search_accuracy(holdout, params, select_cfg)
        checkpoints.append((acc, epoch, C_g.copy(), w_g.copy()))
    top = max(cp[0] for cp in checkpoints)
    chosen = next(cp for cp in checkpoints if cp[0] >= top - 0.0025)
    rep["loss"] = history
    rep["chosen_epoch"] = chosen[1]
    rep["holdout_accuracy"] = chosen[0]
    params.C_g, params.w_g = chosen[2], chosen[3]
    return rep


def collect_prune_steps(
    caches: list[ScoredInstance], params: ModelParams, cfg: TrainConfig, seed: int
) -> tuple[list[prn.PruneStep], dict]:
    """Run fixed-depth h1 training searches under the current pruner weights
    and reduce every pruning step's solutions to their ranking statistics."""
    config = SearchConfig(
        beam=cfg.collect_beam, branch_k=cfg.k, heuristic="h1", depth_mode="25", seed=seed
    )
    saved = params.C_g, params.w_g
    if params.C_g is None or params.w_g is None:
        params.C_g, params.w_g = np.zeros((params.d, params.d)), np.zeros(3)
    steps: list[prn.PruneStep] = []
    skipped_docs = 0
    try:
        for cache in caches:
            if np.any(cache.gold_eids() < 0):
                skipped_docs += 1
                continue
            _, trace = search(cache, config, params)
            for ts in trace.steps:
                steps.append(prn.PruneStep.from_solutions(cache, ts.solutions))
    finally:
        params.C_g, params.w_g = saved
    return steps, {"collected_steps": len(steps), "skipped_docs": skipped_docs}


# ---------------------------------------------------------------------------
# linking / evaluation over documents (optionally in parallel)

_WORKER: dict = {}


def _init_worker(kb, params, config):
    _WORKER["kb"] = kb
    _WORKER["params"] = params
    _WORKER["config"] = config


def _doc_record(instance: LinkingInstance) -> dict:
    """Everything evaluation needs from one document, as plain data."""
    kb, params, config = _WORKER["kb"], _WORKER["params"], _WORKER["config"]
    doc = instance.document
    record: dict = {"doc_id": doc.id, "golds": [], "preds": {}, "active": None}
    gold_mentions = [i for i, m in enumerate(doc.mentions) if m.gold_entity is not None]
    record["golds"] = [doc.mentions[i].gold_entity for i in gold_mentions]

    if not instance.active:
        for sys in ("local", "one_step", "converged", "lds"):
            record["preds"][sys] = [None] * len(gold_mentions)
        record["rarity"] = {
            "prior": [0.0] * len(gold_mentions),
            "local": [False] * len(gold_mentions),
            "converged": [False] * len(gold_mentions),
            "lds": [False] * len(gold_mentions),
        }
        return record

    cache = build_cache(instance, kb, params)
    sols = run_baselines(cache, config, params)
    eids = {name: cache.assigned_eids(sol) for name, sol in sols.items()}
    pos_of = {mi: pos for pos, mi in enumerate(instance.active)}
    for name in ("local", "one_step", "converged", "lds"):
        record["preds"][name] = [
            int(eids[name][pos_of[i]]) if i in pos_of else None for i in gold_mentions
        ]

    # heuristic flags and correctness over active gold mentions
    h1_rep = heur.order_mentions(cache, "h1", params)
    n = cache.n
    cut25 = set(h1_rep.order[: math.ceil(0.25 * n)])
    cut50 = set(h1_rep.order[: math.ceil(0.50 * n)])
    h2_flags = None
    if "h2" in params.stages_done():
        h2_rep = heur.order_mentions(cache, "h2", params)
        h2_flags = h2_rep.flagged
    golds_pos = [p for p in range(n) if cache.gold_eids()[p] >= 0]
    local_eids = eids["local"]
    gold_eids = cache.gold_eids()
    record["active"] = {
        "local_correct": [bool(local_eids[p] == gold_eids[p]) for p in golds_pos],
        "h1_flag25": [p in cut25 for p in golds_pos],
        "h1_flag50": [p in cut50 for p in golds_pos],
        "h2_flag": [bool(h2_flags[p]) for p in golds_pos] if h2_flags is not None else None,
    }
    # rarity rows over every gold mention (unlinkable ones carry prior 0)
    prior_by_mention = {}
    for pos, mi in enumerate(instance.active):
        g = doc.mentions[mi].gold_entity
        if g is None:
            continue
        prior = 0.0
        for c in instance.candidates[mi]:
            if c.entity_id == g:
                prior = c.prior
                break
        prior_by_mention[mi] = prior
    record["rarity"] = {
        "prior": [prior_by_mention.get(i, 0.0) for i in gold_mentions],
        "local": [p == g for p, g in zip(record["preds"]["local"], record["golds"])],
        "converged": [p == g for p, g in zip(record["preds"]["converged"], record["golds"])],
        "lds": [p == g for p, g in zip(record["preds"]["lds"], record["golds"])],
    }
    return record


def _map_docs(fn, instances, kb, params, config, jobs: int):
    if jobs <= 1:
        _init_worker(kb, params, config)
        return [fn(inst) for inst in instances]
    with ProcessPoolExecutor(
        max_workers=jobs, initializer=_init_worker, initargs=(kb, params, config)
    ) as pool:
        return list(pool.map(fn, instances))


def evaluate(
    kb: KnowledgeBase,
    instances: list[LinkingInstance],
    params: ModelParams,
    config: SearchConfig,
    seed: int = 0,
    jobs: int = 1,
) -> EvalReport:
    """Ablation-row accuracies plus heuristic confusions and rarity bins."""
    params.require("local-mlp", "coherence", "pruner")
    records = _map_docs(_doc_record, instances, kb, params, config, jobs)
    golds, preds = [], {s: [] for s in ("local", "one_step", "converged", "lds")}
    local_correct, f25, f50, fh2 = [], [], [], []
    rar_prior, rar_local, rar_conv, rar_lds = [], [], [], []
    have_h2 = True
    for rec in records:
        golds.extend(rec["golds"])
        for s in preds:
            preds[s].extend(rec["preds"][s])
        if rec["active"] is not None:
            local_correct.extend(rec["active"]["local_correct"])
            f25.extend(rec["active"]["h1_flag25"])
            f50.extend(rec["active"]["h1_flag50"])
            if rec["active"]["h2_flag"] is None:
                have_h2 = False
            else:
                fh2.extend(rec["active"]["h2_flag"])
        rar_prior.extend(rec["rarity"]["prior"])
        rar_local.extend(rec["rarity"]["local"])
        rar_conv.extend(rec["rarity"]["converged"])
        rar_lds.extend(rec["rarity"]["lds"])
    if not golds:
        raise DataError("no gold-labelled mentions to evaluate")
    report = EvalReport(
        seed=seed,
        config={
            "heuristic": config.heuristic,
            "depth_mode": config.depth_mode,
            "beam": config.beam,
            "branch_k": config.branch_k,
        },
        mentions=len(golds),
    )
    for s in preds:
        report.accuracies[s] = micro_accuracy(preds[s], golds)
    if local_correct:
        report.confusions["h1_tau25"] = heuristic_confusion(local_correct, f25)
        report.confusions["h1_tau50"] = heuristic_confusion(local_correct, f50)
        if have_h2 and fh2:
            report.confusions["h2_flex"] = heuristic_confusion(local_correct, fh2)
    report.rarity["converged"] = rarity_analysis(rar_conv, rar_local, rar_prior)
    report.rarity["lds"] = rarity_analysis(rar_lds, rar_local, rar_prior)
    return report


def _link_record(instance: LinkingInstance) -> list[dict]:
    kb, params, config = _WORKER["kb"], _WORKER["params"], _WORKER["config"]
    doc = instance.document
    rows = []
    eids = {}
    if instance.active:
        cache = build_cache(instance, kb, params)
        local = cache.local_argmax()
        lds, _ = search(cache, config, params)
        eids = {
            "local": dict(zip(instance.active, (int(x) for x in cache.assigned_eids(local)))),
            "lds": dict(zip(instance.active, (int(x) for x in cache.assigned_eids(lds)))),
        }
    for i in range(len(doc.mentions)):
        for sys in ("local", "lds"):
            rows.append(
                {
                    "doc_id": doc.id,
                    "mention": i,
                    "entity": eids.get(sys, {}).get(i),
                    "system": sys,
                }
            )
    return rows


def link_documents(
    kb: KnowledgeBase,
    instances: list[LinkingInstance],
    params: ModelParams,
    config: SearchConfig,
    jobs: int = 1,
) -> list[dict]:
    params.require("local-mlp", "coherence", "pruner")
    if config.heuristic == "h2":
        params.require("h2")
    nested = _map_docs(_link_record, instances, kb, params, config, jobs)
    return [row for rows in nested for row in rows]


def ablation_run(
    kb: KnowledgeBase,
    instances: list[LinkingInstance],
    params: ModelParams,
    grid=DEFAULT_GRID,
    seed: int = 0,
    jobs: int = 1,
) -> list[EvalReport]:
    """One evaluation report per (heuristic, depth mode, beam) grid point."""
    reports = []
    for heuristic, depth_mode, beam in grid:
        config = SearchConfig(beam=beam, heuristic=heuristic, depth_mode=depth_mode, seed=seed)
        config.validate()
        reports.append(evaluate(kb, instances, params, config, seed=seed, jobs=jobs))
    return reports


# ---------------------------------------------------------------------------
# oracle equivalence suite


def oracle_check(seed: int = 0, n_instances: int = 50, samples: int = 100) -> dict:
    """Tiny-instance equivalence: full-width full-depth search must match
    the exhaustive discrepancy enumeration's pruning score, and the exact
    joint argmax must dominate random assignments."""
    rng = np.random.default_rng(seed)
    cfg = SynthConfig(
        d=6,
        n_entities=30,
        n_topics=3,
        n_docs=n_instances + 2,  # one instance per document, small margin
        mentions_per_doc=3,
        cands_per_surface=3,
        words_per_topic=8,
        seed=seed,
    )
    kb, lexicon, splits = generate(cfg)
    docs = [d for split in ("train", "dev", "test") for d in splits[split]]
    instances = build_instances(docs, kb, lexicon, k=3)

    params = ModelParams(d=kb.d, half_window=15)
    params.A = rng.standard_normal((kb.d, kb.d)) * 0.5
    params.B = rng.standard_normal((kb.d, kb.d)) * 0.5
    params.lex_binners, params.prior_binner = lm.fit_feature_binners(instances, kb)
    h1_, h2_ = lm.hidden_sizes(2 * kb.d + 1 + 90 + 10)
    params.local_mlp = nn.Mlp.create(
        [2 * kb.d + 1 + 90 + 10, h1_, h2_, 1], ["relu", "relu", "sigmoid"], rng
    )
    params.C = rng.standard_normal((kb.d, kb.d)) * 0.3
    params.w = rng.standard_normal(3) * 0.3
    params.C_g = rng.standard_normal((kb.d, kb.d)) * 0.3
    params.w_g = rng.standard_normal(3) * 0.3
    params.h2_constant = 0.0  # flags every mention: flexible depth == n

    checked = 0
    search_matches = 0
    argmax_ok = 0
    worst_gap = 0.0
    for inst in instances:
        if checked >= n_instances:
            break
        if not inst.active:
            continue
        cache = build_cache(inst, kb, params)
        n, kmax = cache.n, int(cache.ncand.max())
        config = SearchConfig(beam=kmax**n, branch_k=kmax, heuristic="h2", depth_mode="flex")
        sol, trace = search(cache, config, params)
        s_search = trace.final.score.total
        _, s_enum = orc.exhaustive_discrepancy_best(cache, trace.depth_budget, config, params)
        gap = abs(s_search - s_enum)
        worst_gap = max(worst_gap, gap)
        if gap <= 1e-9:
            search_matches += 1
        best_sol, best_val = orc.exact_argmax(cache, params)
        ok = True
        for _ in range(samples):
            rand = np.array([rng.integers(k) for k in cache.ncand], dtype=np.int32)
            if orc.joint_objective(cache, params, rand) > best_val + 1e-9:
                ok = False
                break
        argmax_ok += ok
        checked += 1
    return {
        "instances": checked,
        "search_matches": search_matches,
        "argmax_ok": argmax_ok,
        "worst_gap": worst_gap,
        "ok": checked > 0 and search_matches == checked and argmax_ok == checked,
    }
