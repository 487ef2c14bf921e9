"""Pure numpy implementations of the hot search kernels.

These are the reference semantics; the compiled `_core` extension mirrors
them loop for loop. All three operate on a per-document pairwise score
table `utab` with utab[a, b] = coherence of candidate-entity b appearing in
the context of assigned-entity a (rows index unique entities).

Shared arguments:
    utab   (u, u) float64   pairwise coherence of unique entities
    psi    (n, k) float64   cached local scores, padded past ncand[i]
    uid    (n, k) int32     unique-entity row per (mention, candidate)
    ncand  (n,)   int32     live candidate count per mention
    assign (n,)   int32     current candidate index per mention
    half_window             context reaches this many mentions each side
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _context_rows(uid, assign, i, half_window):
    n = assign.shape[0]
    lo = max(0, i - half_window)
    hi = min(n, i + half_window + 1)
    idx = np.r_[lo:i, i + 1 : hi]
    return uid[idx, assign[idx]]


def g_row(utab, psi, uid, ncand, assign, i, half_window):
    """Propagator scores of every candidate of mention i against the current
    assignment: psi + mean pairwise coherence over the context window
    (psi alone when the window is empty)."""
    k = int(ncand[i])
    ctx = _context_rows(uid, assign, i, half_window)
    if ctx.size == 0:
        return psi[i, :k].astype(np.float64, copy=True)
    return psi[i, :k] + utab[ctx[:, None], uid[i, :k]].mean(axis=0)


def sweep_argmax(utab, psi, uid, ncand, assign, targets, half_window):
    """Best candidate per target mention, scored synchronously against the
    frozen `assign`; ties resolve to the lowest candidate index."""
    out = np.empty(len(targets), dtype=np.int32)
    for t, i in enumerate(targets):
        out[t] = int(np.argmax(g_row(utab, psi, uid, ncand, assign, int(i), half_window)))
    return out


def pair_sum(utab, uid, assign, half_window):
    """Sum of utab over unordered assigned pairs within the window."""
    n = assign.shape[0]
    if n < 2:
        return 0.0
    sel = uid[np.arange(n), assign]
    iu, ju = np.triu_indices(n, 1)
    keep = (ju - iu) <= half_window
    return float(utab[sel[iu[keep]], sel[ju[keep]]].sum())
