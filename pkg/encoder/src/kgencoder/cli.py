"""Command-line surface: finetune a checkpoint, export embeddings.

Exit codes: 0 success, 1 runtime failure (bad corpus, unreadable
checkpoint, I/O), 2 usage errors (unknown flags, missing paths).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import load_corpus, load_triplets
from .errors import KgencoderError
from .export import export_embeddings
from .finetune import FinetuneConfig, finetune, load_checkpoint, save_checkpoint


class UsageError(Exception):
    pass


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


def cmd_finetune(args) -> int:
    corpus = load_corpus(_require_file(Path(args.corpus), "corpus"))
    triplets = load_triplets(_require_file(Path(args.train), "train split"))
    cfg = FinetuneConfig(
        dim=args.dim,
        heads=args.heads,
        layers=args.layers,
        ffn=args.ffn,
        dropout=args.dropout,
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        budget=args.budget,
        seed=args.seed,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    history_path = out_dir / "history.jsonl"
    with open(history_path, "w", encoding="utf-8") as fh:

        def progress(record):
            fh.write(json.dumps(record) + "\n")
            print(json.dumps(record), file=sys.stderr)

        checkpoint, history = finetune(corpus, triplets, cfg, progress=progress)
    ckpt_path = out_dir / "checkpoint.kgenc"
    save_checkpoint(ckpt_path, checkpoint)
    print(
        json.dumps(
            {
                "checkpoint": str(ckpt_path),
                "history": str(history_path),
                "final": history[-1],
            }
        )
    )
    return 0


def cmd_export(args) -> int:
    model, tokenizer, _, cfg = load_checkpoint(
        _require_file(Path(args.checkpoint), "checkpoint")
    )
    corpus = load_corpus(_require_file(Path(args.corpus), "corpus"))
    out = export_embeddings(model, tokenizer, cfg, corpus, args.out)
    print(json.dumps({"embeddings": str(out), "entities": len(corpus), "dim": cfg.dim}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgencoder",
        description="Fine-tune the description encoder and export entity embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ft = sub.add_parser("finetune", help="train an encoder checkpoint")
    ft.add_argument("--corpus", required=True, help="descriptions TSV (entity<TAB>text)")
    ft.add_argument("--train", required=True, help="triplet file (head<TAB>relation<TAB>tail)")
    ft.add_argument("--out", required=True, help="output directory")
    ft.add_argument("--dim", type=int, default=FinetuneConfig.dim)
    ft.add_argument("--heads", type=int, default=FinetuneConfig.heads)
    ft.add_argument("--layers", type=int, default=FinetuneConfig.layers)
    ft.add_argument("--ffn", type=int, default=FinetuneConfig.ffn)
    ft.add_argument("--dropout", type=float, default=FinetuneConfig.dropout)
    ft.add_argument("--lr", type=float, default=FinetuneConfig.learning_rate)
    ft.add_argument("--batch", type=int, default=FinetuneConfig.batch_size)
    ft.add_argument("--epochs", type=int, default=FinetuneConfig.epochs)
    ft.add_argument("--budget", type=int, default=FinetuneConfig.budget)
    ft.add_argument("--seed", type=int, default=FinetuneConfig.seed)
    ft.set_defaults(func=cmd_finetune)

    ex = sub.add_parser("export", help="write entity embeddings from a checkpoint")
    ex.add_argument("--checkpoint", required=True)
    ex.add_argument("--corpus", required=True)
    ex.add_argument("--out", required=True, help="output embedding file")
    ex.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KgencoderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
