"""Command-line entry point.

Subcommands: synth, train, link, eval, ablate, oracle-check. Global flags
(--seed, --config, --beam, --branch-k, --heuristic, --depth-mode, --jobs)
may also come from a versioned key-value JSON config file; explicit flags
win. Exit codes: 0 success, 1 usage, 2 data error, 3 oracle guard exceeded.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .corpus import load_corpus, load_lexicon, save_corpus, save_lexicon
from .errors import DataError, GuardExceededError
from .evalrep import format_table, report_text
from .kb import load_kb, save_kb
from .params import STAGES, load_params, save_params
from .pipeline import (
    DEFAULT_GRID,
    TrainConfig,
    ablation_run,
    build_instances,
    evaluate,
    link_documents,
    oracle_check,
    train_stages,
)
from .search import SearchConfig
from .synth import SynthConfig, generate

CONFIG_VERSION = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


GLOBAL_DEFAULTS = {
    "seed": 0,
    "beam": 5,
    "branch_k": 5,
    "heuristic": "h2",
    "depth_mode": "flex",
    "jobs": 1,
}


def _add_global_flags(p: _Parser):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", type=str, default=None, help="JSON config file mirroring the flags")
    p.add_argument("--beam", type=int, default=None)
    p.add_argument("--branch-k", dest="branch_k", type=int, default=None)
    p.add_argument("--heuristic", choices=("h1", "h2"), default=None)
    p.add_argument("--depth-mode", dest="depth_mode", choices=("25", "50", "flex"), default=None)
    p.add_argument("--jobs", type=int, default=None)


def _load_config_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise DataError(f"missing config file {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid config file {p}: {exc}") from None
    if not isinstance(doc, dict):
        raise DataError(f"config file {p} must hold a JSON object")
    if doc.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        raise DataError(f"unsupported config version {doc.get('version')}")
    return doc


def _resolve(args) -> dict:
    """Flag > config file > default, for every mirrored key."""
    file_cfg = _load_config_file(args.config) if args.config else {}
    out = dict(file_cfg)
    for key, default in GLOBAL_DEFAULTS.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else file_cfg.get(key, default)
    return out


def _search_config(cfg: dict) -> SearchConfig:
    sc = SearchConfig(
        beam=int(cfg["beam"]),
        branch_k=int(cfg["branch_k"]),
        heuristic=cfg["heuristic"],
        depth_mode=cfg["depth_mode"],
        seed=int(cfg["seed"]),
    )
    sc.validate()
    return sc


def _train_config(cfg: dict) -> TrainConfig:
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    kwargs = {k: v for k, v in cfg.items() if k in fields}
    kwargs["k"] = int(cfg["branch_k"])
    return TrainConfig(**kwargs)


def _load_dataset(args, cfg):
    kb = load_kb(args.kb)
    lexicon = load_lexicon(args.lexicon)
    docs = load_corpus(args.corpus)
    instances = build_instances(docs, kb, lexicon, k=int(cfg["branch_k"]))
    return kb, lexicon, docs, instances


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def cmd_synth(args) -> int:
    cfg = _resolve(args)
    fields = {f.name for f in dataclasses.fields(SynthConfig)}
    overrides = {k: v for k, v in cfg.items() if k in fields}
    for name in ("docs", "entities", "topics", "mentions", "cands"):
        val = getattr(args, name, None)
        if val is not None:
            key = {
                "docs": "n_docs",
                "entities": "n_entities",
                "topics": "n_topics",
                "mentions": "mentions_per_doc",
                "cands": "cands_per_surface",
            }[name]
            overrides[key] = val
    for name in ("d", "gamma", "noise", "prior_sharpness"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    overrides["seed"] = int(cfg["seed"])
    sc = SynthConfig(**overrides)
    sc.validate()
    kb, lexicon, splits = generate(sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_kb(kb, out / "kb")
    save_lexicon(lexicon, out / "lexicon.jsonl")
    for split, docs in splits.items():
        save_corpus(docs, out / f"{split}.jsonl")
    (out / "synth-config.json").write_text(
        json.dumps({"version": CONFIG_VERSION, **dataclasses.asdict(sc)}, sort_keys=True) + "\n"
    )
    print(f"wrote {sum(len(d) for d in splits.values())} documents to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args)
    kb, _, _, instances = _load_dataset(args, cfg)
    stages = [s.strip() for s in args.stages.split(",")] if args.stages else list(STAGES)
    for s in stages:
        if s not in STAGES:
            raise UsageError(f"unknown training stage {s!r} (choose from {', '.join(STAGES)})")
    params = load_params(args.params_in) if args.params_in else None
    params, reports = train_stages(
        kb, instances, _train_config(cfg), seed=int(cfg["seed"]), stages=stages, params=params
    )
    save_params(params, args.out)
    for stage, rep in reports.items():
        loss = rep.get("loss") or []
        tail = f", final loss {loss[-1]:.4f}" if loss else ""
        print(f"stage {stage}: done{tail}")
    print(f"wrote parameters to {args.out}")
    return 0


def cmd_link(args) -> int:
    cfg = _resolve(args)
    search_cfg = _search_config(cfg)
    params = load_params(args.params)
    kb, _, _, instances = _load_dataset(args, cfg)
    rows = link_documents(kb, instances, params, search_cfg, jobs=int(cfg["jobs"]))
    _write_jsonl(args.out, rows)
    print(f"wrote {len(rows)} predictions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    search_cfg = _search_config(cfg)
    params = load_params(args.params)
    kb, _, _, instances = _load_dataset(args, cfg)
    report = evaluate(
        kb, instances, params, search_cfg, seed=int(cfg["seed"]), jobs=int(cfg["jobs"])
    )
    text = report_text(report)
    if args.out:
        Path(str(args.out) + ".jsonl").write_text(report.to_jsonl() + "\n")
        Path(str(args.out) + ".txt").write_text(text)
    print(text, end="")
    return 0


def cmd_ablate(args) -> int:
    cfg = _resolve(args)
    params = load_params(args.params)
    kb, _, _, instances = _load_dataset(args, cfg)
    reports = ablation_run(
        kb, instances, params, grid=DEFAULT_GRID, seed=int(cfg["seed"]), jobs=int(cfg["jobs"])
    )
    rows = []
    for rep in reports:
        rows.append(
            [
                rep.config["heuristic"],
                rep.config["depth_mode"],
                rep.config["beam"],
                100.0 * rep.accuracies["lds"],
            ]
        )
    table = format_table(["heuristic", "depth", "beam", "accuracy %"], rows)
    if args.out:
        _write_jsonl(str(args.out) + ".jsonl", [r.to_record() for r in reports])
        Path(str(args.out) + ".txt").write_text(table + "\n")
    print(table)
    return 0


def cmd_oracle_check(args) -> int:
    cfg = _resolve(args)
    res = oracle_check(seed=int(cfg["seed"]), n_instances=args.instances)
    print(
        f"instances {res['instances']}: search==enumeration {res['search_matches']}, "
        f"argmax-dominates {res['argmax_ok']}, worst gap {res['worst_gap']:.2e}"
    )
    if not res["ok"]:
        raise DataError("oracle equivalence check failed")
    print("oracle check passed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="ldslink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic KB + corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int)
    p.add_argument("--entities", type=int)
    p.add_argument("--topics", type=int)
    p.add_argument("--mentions", type=int)
    p.add_argument("--cands", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--prior-sharpness", dest="prior_sharpness", type=float)
    _add_global_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run training stages and write the parameter file")
    p.add_argument("--kb", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stages", help=f"comma list from: {','.join(STAGES)}")
    p.add_argument("--params-in", dest="params_in", help="existing parameter file to extend")
    _add_global_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("link", help="link a corpus and write predictions")
    p.add_argument("--kb", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    _add_global_flags(p)
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("eval", help="evaluate the ablation systems on a corpus")
    p.add_argument("--kb", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", help="report path prefix (.jsonl/.txt)")
    _add_global_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="heuristic/depth/beam grid")
    p.add_argument("--kb", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", help="report path prefix (.jsonl/.txt)")
    _add_global_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("oracle-check", help="tiny-instance brute-force equivalence suite")
    p.add_argument("--instances", type=int, default=50)
    _add_global_flags(p)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except GuardExceededError as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
