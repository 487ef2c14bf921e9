"""Surface-level features shared by the local scorer and the confidence
heuristics: edit distances, acronym tests, and RBF binning of scalars."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_BINS = 10
LEXICAL_FEATURE_COUNT = 9


def min_edit(a: str, b: str) -> int:
    """Unit-cost Levenshtein distance (insert / delete / substitute)."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return prev[-1]


def is_acronym(s: str) -> bool:
    """Single token, length >= 2, at least one letter, no lowercase letters.

    Periods (and other non-letters) are permitted, so "U.S.A." counts.
    """
    if len(s) < 2 or any(c.isspace() for c in s):
        return False
    letters = [c for c in s if c.isalpha()]
    return bool(letters) and all(c.isupper() for c in letters)


def _letters(s: str) -> str:
    return "".join(c for c in s if c.isalpha())


def _initials(tokens) -> str:
    return "".join(t[0] for t in tokens if t).upper()


def lexical_features(mention_tokens, title_tokens, doc_tokens) -> np.ndarray:
    """Nine scalars comparing a mention's surface with an entity title.

    Order: mention length, title length, title-token occurrences in the
    document, mention-is-acronym, title-is-acronym, acronym-pattern match,
    non-acronym exact match, whole-string edit distance, summed per-token
    minimum edit distance. String comparisons are case-folded; acronym tests
    keep original case.
    """
    if not mention_tokens or not title_tokens:
        raise ValueError("mention and title token sequences must be nonempty")
    m_str = " ".join(mention_tokens)
    t_str = " ".join(title_tokens)
    m_fold = [t.casefold() for t in mention_tokens]
    t_fold = [t.casefold() for t in title_tokens]
    doc_fold = [t.casefold() for t in doc_tokens]
    f1 = float(len(mention_tokens))
    f2 = float(len(title_tokens))
    f3 = float(sum(doc_fold.count(t) for t in t_fold))
    f4 = is_acronym(m_str)
    f5 = is_acronym(t_str)
    f6 = (f4 and _letters(m_str) == _initials(title_tokens)) or (
        f5 and _letters(t_str) == _initials(mention_tokens)
    )
    f7 = (not f4) and (not f5) and m_fold == t_fold
    f8 = float(min_edit(" ".join(m_fold), " ".join(t_fold)))
    f10 = float(sum(min(min_edit(mi, tj) for tj in t_fold) for mi in m_fold))
    return np.array([f1, f2, f3, float(f4), float(f5), float(f6), float(f7), f8, f10])


@dataclass(frozen=True)
class RbfBinner:
    """Radial-basis binning of one scalar feature onto N_BINS centers."""

    centers: np.ndarray  # strictly increasing, length N_BINS
    width: float

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")
        if np.any(np.diff(self.centers) <= 0):
            raise ValueError("centers must be strictly increasing")


def fit_binner(values) -> RbfBinner:
    """Evenly space N_BINS centers over [min, max] of the training values;
    width equals the center spacing. All-identical values span [v-.5, v+.5]."""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot fit a binner on no values")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    centers = np.linspace(lo, hi, N_BINS)
    return RbfBinner(centers=centers, width=float(centers[1] - centers[0]))


def rbf_bin(x: float, binner: RbfBinner) -> np.ndarray:
    """Gaussian kernel response at each center: exp(-(x-c)^2 / (2 w^2))."""
    dx = x - binner.centers
    return np.exp(-(dx * dx) / (2.0 * binner.width * binner.width))


def bin_scalars(values: np.ndarray, binners) -> np.ndarray:
    """Concatenate rbf_bin of each scalar with its own binner."""
    if len(values) != len(binners):
        raise ValueError("one binner per scalar required")
    return np.concatenate([rbf_bin(float(v), b) for v, b in zip(values, binners)])
