"""Limited discrepancy beam search over correction sets.

Starting from the local argmax solution, the search walks the mentions in
ascending confidence order. At each depth every beam state expands into
one child per candidate of the next mention (the current assignment
first), each child's discrepancy set is propagated into a complete
solution, and the pruning score cuts the pooled children back to the beam
width. The answer is the best-scored solution of the final depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cache import ScoredInstance
from .coherence import iterate_propagation, propagate
from .errors import DataError
from .heuristics import ConfidenceReport, order_mentions
from .params import ModelParams
from .pruner import PruneScore, hamming, hamming_between, prune_score

DEPTH_MODES = ("25", "50", "flex")


@dataclass(frozen=True)
class SearchConfig:
    beam: int = 5
    branch_k: int = 5
    heuristic: str = "h2"
    depth_mode: str = "flex"  # "25" | "50" | "flex"
    max_prop_iters: int = 50  # convergence cap for the no-search baseline
    seed: int = 0

    def validate(self):
        if self.beam < 1 or self.branch_k < 1:
            raise ValueError("beam and branch_k must be >= 1")
        if self.heuristic not in ("h1", "h2"):
            raise ValueError(f"unknown heuristic {self.heuristic!r}")
        if self.depth_mode not in DEPTH_MODES:
            raise ValueError(f"unknown depth mode {self.depth_mode!r}")
        if self.depth_mode == "flex" and self.heuristic != "h2":
            raise ValueError("flexible depth is defined only for heuristic h2")


@dataclass
class SearchState:
    disc: tuple[tuple[int, int], ...]  # ordered (mention, candidate) pins
    solution: np.ndarray  # propagated complete solution
    score: PruneScore
    changes: int  # mentions differing from the initial solution

    @property
    def depth(self) -> int:
        return len(self.disc)


@dataclass
class TraceStep:
    mention: int  # expanded mention position
    solutions: list[np.ndarray]  # all children, expansion order
    scores: list[float]
    kept: list[int]  # indices retained in the beam
    hammings: list[int] | None = None


@dataclass
class SearchTrace:
    confidence: ConfidenceReport
    depth_budget: int
    steps: list[TraceStep] = field(default_factory=list)
    best_overall: SearchState | None = None  # best scored state at any depth
    final: SearchState | None = None  # the answer: best of the last depth


def depth_budget(config: SearchConfig, report: ConfidenceReport, n: int) -> int:
    if config.depth_mode == "25":
        return math.ceil(0.25 * n)
    if config.depth_mode == "50":
        return math.ceil(0.50 * n)
    if report.flagged is None:
        raise DataError("flexible depth requires h2 confidence flags")
    return int(report.flagged.sum())


def initial_state(cache: ScoredInstance, params: ModelParams, utab_g: np.ndarray | None = None) -> SearchState:
    """Root of the search: the per-mention local argmax, empty discrepancy
    set, and its pruning score."""
    params.require("pruner")
    sol = cache.local_argmax()
    score = prune_score(cache, sol, params.C_g, params.w_g, utab_g=utab_g)
    return SearchState(disc=(), solution=sol, score=score, changes=0)


def expand(
    state: SearchState,
    mention: int,
    cache: ScoredInstance,
    params: ModelParams,
    initial: np.ndarray,
    branch_k: int | None = None,
    utab_prop: np.ndarray | None = None,
    utab_g: np.ndarray | None = None,
) -> list[SearchState]:
    """Children of one state on one mention: the current assignment first,
    then the remaining candidates in stored (prior) order, truncated to
    branch_k; each child propagated and prune-scored."""
    if any(pos == mention for pos, _ in state.disc):
        raise DataError(f"mention {mention} already pinned in this discrepancy set")
    if utab_prop is None:
        utab_prop = cache.utab(params.C, params.w)
    if utab_g is None:
        utab_g = cache.utab(params.C_g, params.w_g)
    incumbent = int(state.solution[mention])
    cand_order = [incumbent] + [j for j in range(int(cache.ncand[mention])) if j != incumbent]
    if branch_k is not None:
        cand_order = cand_order[:branch_k]
    children = []
    for j in cand_order:
        disc = state.disc + ((mention, j),)
        sol = propagate(cache, initial, disc, utab=utab_prop)
        score = prune_score(cache, sol, params.C_g, params.w_g, utab_g=utab_g)
        children.append(
            SearchState(
                disc=disc,
                solution=sol,
                score=score,
                changes=hamming_between(sol, initial),
            )
        )
    return children


def search(
    cache: ScoredInstance, config: SearchConfig, params: ModelParams
) -> tuple[np.ndarray, SearchTrace]:
    """Run the full beam search and return (solution, trace)."""
    config.validate()
    params.require("local-mlp", "coherence", "pruner")
    if config.heuristic == "h2":
        params.require("h2")
    report = order_mentions(cache, config.heuristic, params)
    budget = depth_budget(config, report, cache.n)
    utab_prop = cache.utab(params.C, params.w)
    utab_g = cache.utab(params.C_g, params.w_g)
    root = initial_state(cache, params, utab_g=utab_g)
    trace = SearchTrace(confidence=report, depth_budget=budget)
    trace.best_overall = root
    trace.final = root
    if budget == 0:
        return root.solution.copy(), trace

    has_gold = bool(np.all(cache.gold_eids() >= 0))
    initial = root.solution
    beam = [root]
    for mention in report.order[:budget]:
        children: list[SearchState] = []
        for state in beam:
            children.extend(
                expand(
                    state,
                    mention,
                    cache,
                    params,
                    initial,
                    branch_k=config.branch_k,
                    utab_prop=utab_prop,
                    utab_g=utab_g,
                )
            )
        ranked = sorted(
            range(len(children)),
            key=lambda i: (-children[i].score.total, children[i].changes, i),
        )
        kept = ranked[: config.beam]
        trace.steps.append(
            TraceStep(
                mention=mention,
                solutions=[c.solution for c in children],
                scores=[c.score.total for c in children],
                kept=kept,
                hammings=[hamming(cache, c.solution) for c in children] if has_gold else None,
            )
        )
        beam = [children[i] for i in kept]
        if beam[0].score.total > trace.best_overall.score.total:
            trace.best_overall = beam[0]
    trace.final = beam[0]
    return beam[0].solution.copy(), trace


def run_baselines(
    cache: ScoredInstance, config: SearchConfig, params: ModelParams
) -> dict[str, np.ndarray]:
    """The ablation-row solutions, sharing one score cache: local argmax,
    one propagation sweep, propagation to convergence, and the full search."""
    utab_prop = cache.utab(params.C, params.w)
    local = cache.local_argmax()
    one_step, _, _ = iterate_propagation(cache, local, max_iters=1, utab=utab_prop)
    converged, _, _ = iterate_propagation(
        cache, local, max_iters=config.max_prop_iters, utab=utab_prop
    )
    lds, _ = search(cache, config, params)
    return {"local": local, "one_step": one_step, "converged": converged, "lds": lds}
