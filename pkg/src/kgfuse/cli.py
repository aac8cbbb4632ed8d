"""Command-line operator surface: stats, train, eval, predict, ablate.

Training configuration is resolved by layering four sources, later
entries winning: builtin defaults, a per-dataset preset matched on the
dataset directory name, a JSON config file (--config), then explicit
flags. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .embeddings import EmbeddingStore, fallback_store, load_embeddings
from .errors import ConfigError, KgfuseError
from .graph import KnowledgeGraph, degree_stats, load_dataset
from .metrics import BUCKET_MODES, evaluate
from .model import (
    BRANCHES,
    TrainConfig,
    load_model,
    read_checkpoint,
    save_checkpoint,
    train,
)

# Per-dataset hyperparameters, keyed by normalized directory name.
PRESETS = {
    "fb15k237": {"context_layers": 2, "max_path_len": 3, "learning_rate": 1e-4},
    "wn18": {"context_layers": 3, "max_path_len": 3, "learning_rate": 1e-4},
    "wn18rr": {"context_layers": 3, "max_path_len": 4, "learning_rate": 5e-4},
    "nell995": {"context_layers": 2, "max_path_len": 5, "learning_rate": 1e-4},
}

# CLI flag destination -> TrainConfig field.
FLAG_FIELDS = {
    "lr": "learning_rate",
    "batch": "batch_size",
    "epochs": "epochs",
    "hidden": "hidden",
    "k_iters": "k_iters",
    "context_layers": "context_layers",
    "max_path_len": "max_path_len",
    "seed": "seed",
}

ABLATION_MASKS = [
    ("prior", "context", "path"),
    ("prior", "context"),
    ("prior", "path"),
    ("context", "path"),
    ("prior",),
    ("context",),
    ("path",),
]


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 2."""


def _normalize_dataset_name(dataset_dir) -> str:
    return "".join(c for c in Path(dataset_dir).name.lower() if c.isalnum())


def preset_for(dataset_dir) -> dict:
    return dict(PRESETS.get(_normalize_dataset_name(dataset_dir), {}))


def _load_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return doc


def parse_branches(text: str) -> frozenset:
    names = frozenset(part.strip() for part in text.split(",") if part.strip())
    unknown = names - frozenset(BRANCHES)
    if unknown:
        raise UsageError(
            f"unknown branches: {', '.join(sorted(unknown))} "
            f"(choose from {', '.join(BRANCHES)})"
        )
    if not names:
        raise UsageError("--branches must name at least one branch")
    return names


def resolve_train_config(args, store_dim: int | None = None) -> TrainConfig:
    """Layer defaults, dataset preset, config file, then flags."""
    merged: dict = {}
    merged.update(preset_for(args.dataset))
    if getattr(args, "config", None):
        doc = _load_config_file(args.config)
        known = set(TrainConfig().to_dict())
        unknown = set(doc) - known
        if unknown:
            raise UsageError(
                f"config file {args.config}: unknown keys {sorted(unknown)}"
            )
        merged.update(doc)
    for flag, field in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            merged[field] = value
    if getattr(args, "branches", None):
        merged["branch_mask"] = parse_branches(args.branches)
    if store_dim is not None and "prior_dim" not in merged:
        merged["prior_dim"] = store_dim
    if "branch_mask" in merged:
        merged["branch_mask"] = frozenset(merged["branch_mask"])
    try:
        cfg = TrainConfig(**merged)
        cfg.validate()
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _require_dir(path, what: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        raise UsageError(f"{what} directory not found: {p}")
    return p


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _open_dataset(args) -> KnowledgeGraph:
    _require_dir(args.dataset, "dataset")
    return load_dataset(args.dataset)


def _open_store(args, g: KnowledgeGraph, dim: int) -> EmbeddingStore:
    if getattr(args, "embeddings", None):
        _require_file(args.embeddings, "embeddings file")
        return load_embeddings(args.embeddings, g)
    return fallback_store(g, dim)


def _store_for_checkpoint(args, g: KnowledgeGraph) -> EmbeddingStore:
    echo, _ = read_checkpoint(_require_file(args.checkpoint, "checkpoint"))
    dim = int(echo.get("config", {}).get("prior_dim", TrainConfig().prior_dim))
    return _open_store(args, g, dim)


def cmd_stats(args) -> int:
    g = _open_dataset(args)
    stats = degree_stats(g)
    report = {
        "entities": g.n_entities,
        "relations": g.n_relations,
        "train_triplets": len(g.train),
        "valid_triplets": len(g.valid),
        "test_triplets": len(g.test),
        "mean_degree": stats["mean_degree"],
        "degree_variance": stats["degree_variance"],
        "max_degree": stats["max_degree"],
        "lis_percent": 100.0 * stats["lis_fraction"],
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _echo(label: str, payload: dict) -> None:
    print(json.dumps({label: payload}, sort_keys=True))


def cmd_train(args) -> int:
    g = _open_dataset(args)
    out = Path(args.out)
    if getattr(args, "embeddings", None):
        store = _open_store(args, g, 0)
        cfg = resolve_train_config(args, store_dim=store.dim)
    else:
        cfg = resolve_train_config(args)
        store = fallback_store(g, cfg.prior_dim)
    if cfg.prior_dim != store.dim:
        raise UsageError(
            f"prior_dim {cfg.prior_dim} does not match embedding dim {store.dim}"
        )
    out.mkdir(parents=True, exist_ok=True)
    _echo("config", cfg.to_dict())
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    def progress(record: dict) -> None:
        print(json.dumps(record, sort_keys=True), file=sys.stderr)

    model, log = train(g, store, cfg, log_path=out / "metrics.jsonl", progress=progress)
    ckpt = out / "checkpoint.museckpt"
    save_checkpoint(ckpt, model)
    _echo("final", {**log[-1], "checkpoint": str(ckpt)})
    return 0


def cmd_eval(args) -> int:
    g = _open_dataset(args)
    store = _store_for_checkpoint(args, g)
    model = load_model(args.checkpoint, g, store)
    report = evaluate(g.test, model, buckets_by=args.buckets, workers=args.workers)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_predict(args) -> int:
    g = _open_dataset(args)
    store = _store_for_checkpoint(args, g)
    model = load_model(args.checkpoint, g, store)
    ranked = model.predict(args.head, args.tail, args.top_k)
    print(
        json.dumps(
            [{"relation": r, "probability": p} for r, p in ranked],
            indent=2,
        )
    )
    return 0


def cmd_ablate(args) -> int:
    g = _open_dataset(args)
    if getattr(args, "embeddings", None):
        store = _open_store(args, g, 0)
        cfg = resolve_train_config(args, store_dim=store.dim)
    else:
        cfg = resolve_train_config(args)
        store = fallback_store(g, cfg.prior_dim)
    rows = []
    for mask in ABLATION_MASKS:
        run_cfg = replace(cfg, branch_mask=frozenset(mask))
        model, _ = train(g, store, run_cfg)
        report = evaluate(g.test, model, workers=args.workers)
        rows.append(
            {
                "branches": "+".join(mask),
                "mrr": report.mrr,
                "hits1": report.hits1,
                "hits3": report.hits3,
            }
        )
        print(
            f"{rows[-1]['branches']:22s} "
            f"MRR {report.mrr:.4f}  H@1 {report.hits1:.4f}  H@3 {report.hits3:.4f}",
            flush=True,
        )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "ablation.jsonl", "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgfuse",
        description="Relation prediction over knowledge graphs: "
        "prior, context, and path branches fused into one classifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_dataset(p):
        p.add_argument("--dataset", required=True, help="dataset directory")

    def add_train_flags(p):
        p.add_argument("--embeddings", help="prior embedding file (MUSEEMB1)")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--batch", type=int)
        p.add_argument("--hidden", type=int)
        p.add_argument("--k-iters", dest="k_iters", type=int)
        p.add_argument("--context-layers", dest="context_layers", type=int)
        p.add_argument("--max-path-len", dest="max_path_len", type=int)
        p.add_argument("--branches", help="comma list from: " + ", ".join(BRANCHES))

    p_stats = sub.add_parser("stats", help="dataset report")
    add_dataset(p_stats)
    p_stats.set_defaults(func=cmd_stats)

    p_train = sub.add_parser("train", help="train and write a checkpoint")
    add_dataset(p_train)
    add_train_flags(p_train)
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    add_dataset(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--embeddings", help="prior embedding file (MUSEEMB1)")
    p_eval.add_argument("--buckets", choices=BUCKET_MODES, default="none")
    p_eval.add_argument("--workers", type=int, default=1)
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="rank relations for one entity pair")
    add_dataset(p_pred)
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--embeddings", help="prior embedding file (MUSEEMB1)")
    p_pred.add_argument("head")
    p_pred.add_argument("tail")
    p_pred.add_argument("--top-k", dest="top_k", type=int, default=5)
    p_pred.set_defaults(func=cmd_predict)

    p_abl = sub.add_parser("ablate", help="train and score all 7 branch subsets")
    add_dataset(p_abl)
    add_train_flags(p_abl)
    p_abl.add_argument("--out", help="optional output directory for ablation.jsonl")
    p_abl.add_argument("--workers", type=int, default=1)
    p_abl.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KgfuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
