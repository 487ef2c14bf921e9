"""Metrics and report assembly: micro accuracy, heuristic confusion
matrices, rarity-bin deltas, and the ablation grids, emitted both as
versioned JSON-lines records and aligned plain-text tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

REPORT_VERSION = 1


def micro_accuracy(predictions, golds) -> float:
    """Pooled fraction of mentions whose predicted entity equals gold.
    Predictions of None (unlinkable mentions) count as wrong."""
    predictions, golds = list(predictions), list(golds)
    if len(predictions) != len(golds):
        raise ValueError("prediction/gold length mismatch")
    if not golds:
        raise DataError("empty evaluation set")
    correct = sum(1 for p, g in zip(predictions, golds) if p is not None and p == g)
    return correct / len(golds)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows: local prediction correct/incorrect; columns: flagged
    low-confidence / high-confidence."""

    correct_flagged: int
    correct_unflagged: int
    incorrect_flagged: int
    incorrect_unflagged: int

    @property
    def total(self) -> int:
        return (
            self.correct_flagged
            + self.correct_unflagged
            + self.incorrect_flagged
            + self.incorrect_unflagged
        )

    @property
    def flagged(self) -> int:
        return self.correct_flagged + self.incorrect_flagged

    def mistake_recall(self) -> float:
        """Share of local mistakes that were flagged low-confidence."""
        mistakes = self.incorrect_flagged + self.incorrect_unflagged
        return self.incorrect_flagged / mistakes if mistakes else 0.0

    def as_rows(self):
        return [
            ["correct", self.correct_flagged, self.correct_unflagged],
            ["incorrect", self.incorrect_flagged, self.incorrect_unflagged],
        ]


def heuristic_confusion(correct_flags, low_conf_flags) -> ConfusionMatrix:
    correct = np.asarray(correct_flags, dtype=bool)
    low = np.asarray(low_conf_flags, dtype=bool)
    if correct.shape != low.shape:
        raise ValueError("flag vectors differ in length")
    return ConfusionMatrix(
        correct_flagged=int(np.sum(correct & low)),
        correct_unflagged=int(np.sum(correct & ~low)),
        incorrect_flagged=int(np.sum(~correct & low)),
        incorrect_unflagged=int(np.sum(~correct & ~low)),
    )


@dataclass(frozen=True)
class RarityBin:
    lo: float
    hi: float
    count: int
    global_accuracy: float
    local_accuracy: float

    @property
    def delta(self) -> float:
        return self.global_accuracy - self.local_accuracy


def rarity_analysis(
    global_correct, local_correct, gold_priors, n_bins: int = 10
) -> list[RarityBin]:
    """Per-bin accuracy difference (global - local) over the gold prior
    p(e|m) scaled to (0, 100); equal-width bins, empty bins omitted."""
    g = np.asarray(global_correct, dtype=bool)
    l = np.asarray(local_correct, dtype=bool)
    p = np.asarray(gold_priors, dtype=np.float64) * 100.0
    if not (g.shape == l.shape == p.shape):
        raise ValueError("input vectors differ in length")
    width = 100.0 / n_bins
    idx = np.minimum((p / width).astype(int), n_bins - 1)
    bins = []
    for b in range(n_bins):
        mask = idx == b
        if not mask.any():
            continue
        bins.append(
            RarityBin(
                lo=b * width,
                hi=(b + 1) * width,
                count=int(mask.sum()),
                global_accuracy=float(g[mask].mean()),
                local_accuracy=float(l[mask].mean()),
            )
        )
    return bins


@dataclass
class EvalReport:
    seed: int
    config: dict
    accuracies: dict[str, float] = field(default_factory=dict)
    confusions: dict[str, ConfusionMatrix] = field(default_factory=dict)
    rarity: dict[str, list[RarityBin]] = field(default_factory=dict)
    mentions: int = 0

    def to_record(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "seed": self.seed,
            "config": self.config,
            "mentions": self.mentions,
            "accuracies": {k: self.accuracies[k] for k in sorted(self.accuracies)},
            "confusions": {
                k: {
                    "correct_flagged": m.correct_flagged,
                    "correct_unflagged": m.correct_unflagged,
                    "incorrect_flagged": m.incorrect_flagged,
                    "incorrect_unflagged": m.incorrect_unflagged,
                }
                for k, m in sorted(self.confusions.items())
            },
            "rarity": {
                k: [
                    {
                        "lo": b.lo,
                        "hi": b.hi,
                        "count": b.count,
                        "global_accuracy": b.global_accuracy,
                        "local_accuracy": b.local_accuracy,
                        "delta": b.delta,
                    }
                    for b in v
                ]
                for k, v in sorted(self.rarity.items())
            },
        }

    def to_jsonl(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)


def format_table(headers: list[str], rows: list[list]) -> str:
    """Aligned plain-text table."""
    cells = [[str(h) for h in headers]] + [
        [f"{c:.4f}" if isinstance(c, float) else str(c) for c in row] for row in rows
    ]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for r, row in enumerate(cells):
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)))
        if r == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(widths))))
    return "\n".join(lines)


def report_text(report: EvalReport) -> str:
    parts = [f"seed {report.seed}, {report.mentions} mentions"]
    if report.accuracies:
        rows = [[name, 100.0 * acc] for name, acc in sorted(report.accuracies.items())]
        parts.append(format_table(["system", "accuracy %"], rows))
    for name, cm in sorted(report.confusions.items()):
        parts.append(f"confusion [{name}] (rows: local correct/incorrect; cols: flagged / not)")
        parts.append(format_table(["", "flagged", "unflagged"], cm.as_rows()))
    for name, bins in sorted(report.rarity.items()):
        rows = [[f"({b.lo:.0f},{b.hi:.0f}]", b.count, b.global_accuracy, b.local_accuracy, b.delta] for b in bins]
        parts.append(f"rarity bins [{name}] (gold prior scaled to (0,100])")
        parts.append(format_table(["bin", "count", "global", "local", "delta"], rows))
    return "\n\n".join(parts) + "\n"
