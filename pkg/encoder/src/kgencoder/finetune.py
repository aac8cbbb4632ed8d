"""Relation-classification fine-tuning of the pair encoder.

Each train triplet (h, r, t) becomes one example: the tokenized pair of
the two entity descriptions, labeled with r. The encoder and the
bias-free classification layer train jointly under cross-entropy
against the one-hot relation indicator. The returned checkpoint is
self-contained: vocabulary, relation names, hyperparameters, weights.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass

import torch
from torch import nn

from .corpus import DescriptionCorpus
from .encoder import PairEncoder, pad_batch
from .errors import CheckpointError, CorpusError
from .tokenizer import BUDGET, WordTokenizer

CHECKPOINT_FORMAT = "KGENC1"


@dataclass(frozen=True)
class FinetuneConfig:
    dim: int = 32
    heads: int = 2
    layers: int = 2
    ffn: int = 64
    dropout: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    budget: int = BUDGET
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1:
            raise CorpusError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise CorpusError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.dim < 1 or self.dim % self.heads != 0:
            raise CorpusError(
                f"dim must be a positive multiple of heads, got dim={self.dim} heads={self.heads}"
            )
        if not 2 <= self.budget <= BUDGET:
            raise CorpusError(f"budget must be in [2, {BUDGET}], got {self.budget}")


def majority_share(labels: list) -> float:
    """Accuracy of always predicting the most frequent label."""
    if not labels:
        raise CorpusError("cannot take the majority over zero labels")
    return Counter(labels).most_common(1)[0][1] / len(labels)


def build_examples(
    corpus: DescriptionCorpus,
    triplets: list[tuple[str, str, str]],
    budget: int,
) -> tuple[WordTokenizer, list[str], list[list[int]], list[int]]:
    """Tokenizer, relation names, and (ids, label) pairs for training."""
    if not triplets:
        raise CorpusError("no training triplets")
    relations = sorted({r for _, r, _ in triplets})
    if len(relations) < 2:
        raise CorpusError(f"need >= 2 relation classes, got {len(relations)}")
    entities: dict[str, None] = {}
    for h, _, t in triplets:
        entities.setdefault(h)
        entities.setdefault(t)
    texts = [corpus.text_for(name) for name in corpus.names]
    texts += [corpus.text_for(name) for name in entities if name not in corpus]
    tokenizer = WordTokenizer.build(texts)
    label_of = {r: i for i, r in enumerate(relations)}
    id_lists = [
        tokenizer.encode_pair(corpus.text_for(h), corpus.text_for(t), budget)
        for h, _, t in triplets
    ]
    labels = [label_of[r] for _, r, _ in triplets]
    return tokenizer, relations, id_lists, labels


def finetune(
    corpus: DescriptionCorpus,
    triplets: list[tuple[str, str, str]],
    cfg: FinetuneConfig = FinetuneConfig(),
    progress=None,
) -> tuple[dict, list[dict]]:
    """Train the encoder; returns (checkpoint dict, per-epoch history)."""
    cfg.validate()
    tokenizer, relations, id_lists, labels = build_examples(corpus, triplets, cfg.budget)
    torch.manual_seed(cfg.seed)
    model = PairEncoder(
        vocab_size=tokenizer.size,
        n_relations=len(relations),
        dim=cfg.dim,
        heads=cfg.heads,
        layers=cfg.layers,
        ffn=cfg.ffn,
        dropout=cfg.dropout,
        max_len=cfg.budget,
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    targets = torch.tensor(labels, dtype=torch.long)
    order_rng = torch.Generator().manual_seed(cfg.seed)

    history = []
    for epoch in range(cfg.epochs):
        model.train()
        order = torch.randperm(len(id_lists), generator=order_rng)
        total_loss = 0.0
        correct = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            ids, pad_mask = pad_batch([id_lists[i] for i in batch])
            logits = model(ids, pad_mask)
            loss = loss_fn(logits, targets[batch])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * len(batch)
            correct += int((logits.argmax(dim=1) == targets[batch]).sum())
        record = {
            "epoch": epoch,
            "train_loss": total_loss / len(id_lists),
            "train_accuracy": correct / len(id_lists),
        }
        history.append(record)
        if progress is not None:
            progress(record)

    checkpoint = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(cfg),
        "vocab": tokenizer.vocab,
        "relations": relations,
        "state": model.state_dict(),
    }
    return checkpoint, history


def save_checkpoint(path, checkpoint: dict) -> None:
    torch.save(checkpoint, path)


def load_checkpoint(path) -> tuple[PairEncoder, WordTokenizer, list[str], FinetuneConfig]:
    """Rebuild the model and tokenizer from a saved checkpoint."""
    try:
        payload = torch.load(path, map_location="cpu")
    except Exception as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
    missing = [k for k in ("config", "vocab", "relations", "state") if k not in payload]
    if missing:
        raise CheckpointError(f"{path}: checkpoint missing keys {missing}")
    try:
        cfg = FinetuneConfig(**payload["config"])
    except TypeError as exc:
        raise CheckpointError(f"{path}: bad config ({exc})") from exc
    tokenizer = WordTokenizer(vocab=payload["vocab"])
    relations = list(payload["relations"])
    model = PairEncoder(
        vocab_size=tokenizer.size,
        n_relations=len(relations),
        dim=cfg.dim,
        heads=cfg.heads,
        layers=cfg.layers,
        ffn=cfg.ffn,
        dropout=cfg.dropout,
        max_len=cfg.budget,
    )
    try:
        model.load_state_dict(payload["state"])
    except RuntimeError as exc:
        raise CheckpointError(f"{path}: weights do not fit the config ({exc})") from exc
    return model, tokenizer, relations, cfg
