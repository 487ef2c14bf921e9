"""Learned-parameter bundle and its versioned on-disk format.

One JSON file holds every trained array (attention matrices, local MLP,
coherence weights, pruner weights, confidence classifier) plus the fitted
feature binners, so a single artifact moves between the train / link /
eval commands. Stage helpers let the CLI name exactly which prerequisite
is missing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .features import RbfBinner
from .nn import Mlp

FORMAT_VERSION = 1

STAGES = ("attention", "local-mlp", "coherence", "h2", "pruner")


@dataclass
class ModelParams:
    d: int
    A: np.ndarray | None = None  # word/entity relatedness, (d, d)
    B: np.ndarray | None = None  # contextual bilinear form, (d, d)
    local_mlp: Mlp | None = None
    lex_binners: list[RbfBinner] = field(default_factory=list)
    prior_binner: RbfBinner | None = None
    C: np.ndarray | None = None  # propagator coherence, (d, d)
    w: np.ndarray | None = None  # propagator pair-feature weights, (3,)
    C_g: np.ndarray | None = None  # pruner coherence, (d, d)
    w_g: np.ndarray | None = None  # pruner pair-feature weights, (3,)
    h2_mlp: Mlp | None = None
    h2_binners: list[RbfBinner] = field(default_factory=list)
    h2_constant: float | None = None  # degenerate classifier fallback
    half_window: int = 15
    dropout: float = 0.7

    def stages_done(self) -> list[str]:
        done = []
        if self.A is not None and self.B is not None:
            done.append("attention")
        if self.local_mlp is not None:
            done.append("local-mlp")
        if self.C is not None and self.w is not None:
            done.append("coherence")
        if self.h2_mlp is not None or self.h2_constant is not None:
            done.append("h2")
        if self.C_g is not None and self.w_g is not None:
            done.append("pruner")
        return done

    def require(self, *stages: str) -> None:
        done = set(self.stages_done())
        for s in stages:
            if s not in done:
                raise DataError(f"missing parameters for stage {s!r}; run training stage {s!r} first")


def _mlp_to_json(mlp: Mlp | None):
    if mlp is None:
        return None
    return {
        "weights": [w.tolist() for w in mlp.weights],
        "biases": [b.tolist() for b in mlp.biases],
        "activations": mlp.activations,
    }


def _mlp_from_json(obj) -> Mlp | None:
    if obj is None:
        return None
    return Mlp(
        weights=[np.asarray(w, dtype=np.float64) for w in obj["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in obj["biases"]],
        activations=list(obj["activations"]),
    )


def _binner_to_json(b: RbfBinner | None):
    if b is None:
        return None
    return {"centers": b.centers.tolist(), "width": b.width}


def _binner_from_json(obj) -> RbfBinner | None:
    if obj is None:
        return None
    return RbfBinner(centers=np.asarray(obj["centers"], dtype=np.float64), width=float(obj["width"]))


def _arr(a: np.ndarray | None):
    return None if a is None else a.tolist()


def _unarr(obj):
    return None if obj is None else np.asarray(obj, dtype=np.float64)


def save_params(params: ModelParams, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "d": params.d,
        "half_window": params.half_window,
        "dropout": params.dropout,
        "arrays": {
            "A": _arr(params.A),
            "B": _arr(params.B),
            "C": _arr(params.C),
            "w": _arr(params.w),
            "C_g": _arr(params.C_g),
            "w_g": _arr(params.w_g),
        },
        "local_mlp": _mlp_to_json(params.local_mlp),
        "h2_mlp": _mlp_to_json(params.h2_mlp),
        "h2_constant": params.h2_constant,
        "binners": {
            "lexical": [_binner_to_json(b) for b in params.lex_binners],
            "prior": _binner_to_json(params.prior_binner),
            "h2": [_binner_to_json(b) for b in params.h2_binners],
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_params(path) -> ModelParams:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing parameter file {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported parameter format version {doc.get('format_version')}")
    arrays = doc["arrays"]
    binners = doc["binners"]
    return ModelParams(
        d=int(doc["d"]),
        A=_unarr(arrays["A"]),
        B=_unarr(arrays["B"]),
        C=_unarr(arrays["C"]),
        w=_unarr(arrays["w"]),
        C_g=_unarr(arrays["C_g"]),
        w_g=_unarr(arrays["w_g"]),
        local_mlp=_mlp_from_json(doc["local_mlp"]),
        h2_mlp=_mlp_from_json(doc["h2_mlp"]),
        h2_constant=doc["h2_constant"],
        lex_binners=[_binner_from_json(b) for b in binners["lexical"]],
        prior_binner=_binner_from_json(binners["prior"]),
        h2_binners=[_binner_from_json(b) for b in binners["h2"]],
        half_window=int(doc.get("half_window", 15)),
        dropout=float(doc.get("dropout", 0.7)),
    )
