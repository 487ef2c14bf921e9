"""Brute-force references used only by tests and the oracle-check command:
exact maximization of the joint objective, and exhaustive enumeration of
discrepancy sets at a fixed depth."""

from __future__ import annotations

import itertools

import numpy as np

from .cache import ScoredInstance
from .coherence import propagate
from .errors import GuardExceededError
from .heuristics import order_mentions
from .params import ModelParams
from .pruner import hamming_between, prune_score
from .search import SearchConfig

ENUM_GUARD = 10**6


def exact_argmax(cache: ScoredInstance, params: ModelParams) -> tuple[np.ndarray, float]:
    """Enumerate every joint assignment and maximize the sum of local
    scores plus coherence over *ordered* entity pairs (no window). Ties go
    to the lexicographically smallest assignment."""
    sizes = [int(k) for k in cache.ncand]
    total = 1
    for k in sizes:
        total *= k
        if total > ENUM_GUARD:
            raise GuardExceededError(f"joint assignment count exceeds {ENUM_GUARD}")
    utab = cache.utab(params.C, params.w)
    n = cache.n
    rows = np.arange(n)
    best_sol, best_val = None, -np.inf
    for combo in itertools.product(*(range(k) for k in sizes)):
        sol = np.asarray(combo, dtype=np.int32)
        sel = cache.uid[rows, sol]
        pair = utab[sel[:, None], sel[None, :]]
        val = cache.psi_sum(sol) + float(pair.sum() - np.trace(pair))
        if val > best_val:
            best_val, best_sol = val, sol
    return best_sol, best_val


def joint_objective(cache: ScoredInstance, params: ModelParams, solution) -> float:
    """The same ordered-pair objective, for spot checks of arbitrary assignments."""
    sol = np.asarray(solution, dtype=np.int32)
    utab = cache.utab(params.C, params.w)
    sel = cache.uid[np.arange(cache.n), sol]
    pair = utab[sel[:, None], sel[None, :]]
    return cache.psi_sum(sol) + float(pair.sum() - np.trace(pair))


def exhaustive_discrepancy_best(
    cache: ScoredInstance, depth: int, config: SearchConfig, params: ModelParams
) -> tuple[np.ndarray, float]:
    """Propagate and prune-score every discrepancy set over the first
    `depth` mentions in heuristic order; return the best final-depth
    solution under the search's tie rules (score, then fewer changes, then
    enumeration order)."""
    report = order_mentions(cache, config.heuristic, params)
    mentions = report.order[:depth]
    total = 1
    for m in mentions:
        total *= int(cache.ncand[m])
        if total > ENUM_GUARD:
            raise GuardExceededError(f"discrepancy enumeration exceeds {ENUM_GUARD}")
    utab_prop = cache.utab(params.C, params.w)
    utab_g = cache.utab(params.C_g, params.w_g)
    initial = cache.local_argmax()
    if depth == 0:
        return initial, prune_score(cache, initial, params.C_g, params.w_g, utab_g=utab_g).total
    best = None  # (score, -changes) maximized
    best_sol = None
    for combo in itertools.product(*(range(int(cache.ncand[m])) for m in mentions)):
        disc = tuple(zip(mentions, combo))
        sol = propagate(cache, initial, disc, utab=utab_prop)
        score = prune_score(cache, sol, params.C_g, params.w_g, utab_g=utab_g).total
        key = (score, -hamming_between(sol, initial))
        if best is None or key > best:
            best, best_sol = key, sol
    return best_sol, best[0]
