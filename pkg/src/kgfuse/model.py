"""Branch fusion, loss, gradients, Adam training loop, and checkpoints.

The three branch logit vectors are summed inside a single softmax; the
branch mask selects which branches are built at all, so masked branches
contribute neither logits nor gradients. Path attention queries the
context pair representation when the context branch is active and falls
back to uniform attention (zero query) when it is masked.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, constant, no_grad
from .context import (
    AUTO_EXCLUDE,
    ContextBranchParams,
    QueryStructure,
    context_branch_expr,
    structure_for_query,
)
from .embeddings import EmbeddingStore, PriorBranchParams, prior_logits_expr
from .errors import CheckpointError, ConfigError, UnknownEntityError
from .graph import KnowledgeGraph, Triplet
from .paths import (
    PathBranchParams,
    PathVocabulary,
    build_path_vocab,
    enumerate_paths,
    path_branch_expr,
    path_ids,
)

BRANCHES = ("prior", "context", "path")
UNKNOWN_RELATION = -1
CKPT_MAGIC = b"MUSECKPT1"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 128
    epochs: int = 60
    hidden: int = 64
    k_iters: int = 2
    context_layers: int = 2
    max_path_len: int = 3
    seed: int = 42
    branch_mask: frozenset = frozenset(BRANCHES)
    prior_dim: int = 64
    weight_prior: float = 1.0
    weight_context: float = 1.0
    weight_path: float = 1.0

    def validate(self) -> None:
        positive = {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "hidden": self.hidden,
            "k_iters": self.k_iters,
            "context_layers": self.context_layers,
            "max_path_len": self.max_path_len,
            "prior_dim": self.prior_dim,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if not self.branch_mask:
            raise ConfigError("branch_mask must name at least one branch")
        unknown = set(self.branch_mask) - set(BRANCHES)
        if unknown:
            raise ConfigError(f"unknown branches in mask: {sorted(unknown)}")

    def branch_weight(self, branch: str) -> float:
        return {
            "prior": self.weight_prior,
            "context": self.weight_context,
            "path": self.weight_path,
        }[branch]

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "hidden": self.hidden,
            "k_iters": self.k_iters,
            "context_layers": self.context_layers,
            "max_path_len": self.max_path_len,
            "seed": self.seed,
            "branch_mask": sorted(self.branch_mask),
            "prior_dim": self.prior_dim,
            "weight_prior": self.weight_prior,
            "weight_context": self.weight_context,
            "weight_path": self.weight_path,
        }

    @staticmethod
    def from_dict(data: dict) -> "TrainConfig":
        kwargs = dict(data)
        if "branch_mask" in kwargs:
            kwargs["branch_mask"] = frozenset(kwargs["branch_mask"])
        cfg = TrainConfig(**kwargs)
        cfg.validate()
        return cfg


@dataclass
class Prediction:
    """Relation distribution and the tie-broken ranking for one query."""

    probs: np.ndarray
    ranked: np.ndarray  # relation ids by descending prob, ties ascending id


@dataclass
class ModelParams:
    prior: PriorBranchParams
    context: ContextBranchParams
    path: PathBranchParams

    def tensors(self) -> dict[str, Tensor]:
        named: dict[str, Tensor] = {}
        named.update(self.prior.tensors())
        named.update(self.context.tensors())
        named.update(self.path.tensors())
        return named

    def branch_tensors(self, mask) -> dict[str, Tensor]:
        named: dict[str, Tensor] = {}
        if "prior" in mask:
            named.update(self.prior.tensors())
        if "context" in mask:
            named.update(self.context.tensors())
        if "path" in mask:
            named.update(self.path.tensors())
        return named


def _glorot(rng: np.random.Generator, shape: tuple[int, int]) -> Tensor:
    bound = math.sqrt(6.0 / (shape[0] + shape[1]))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def _zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def init_params(
    rng: np.random.Generator,
    n_relations: int,
    path_vocab_size: int,
    cfg: TrainConfig,
) -> ModelParams:
    """Seeded init: Glorot uniform matrices, zero biases, fixed order."""
    hidden = cfg.hidden
    prior = PriorBranchParams(
        mlp_w1=_glorot(rng, (2 * cfg.prior_dim, hidden)),
        mlp_b1=_zeros(hidden),
        mlp_w2=_glorot(rng, (hidden, n_relations)),
        mlp_b2=_zeros(n_relations),
    )
    context = ContextBranchParams(
        rel_embed=_glorot(rng, (n_relations, hidden)),
        w=[_glorot(rng, (3 * hidden, hidden)) for _ in range(cfg.k_iters)],
        b=[_zeros(hidden) for _ in range(cfg.k_iters)],
        w_pair=_glorot(rng, (2 * hidden, hidden)),
        b_pair=_zeros(hidden),
        attn_proj=_glorot(rng, (cfg.prior_dim, hidden)),
        out_proj=_glorot(rng, (hidden, n_relations)),
        out_bias=_zeros(n_relations),
    )
    path = PathBranchParams(
        path_embed=_glorot(rng, (path_vocab_size + 1, hidden)),
        out_proj=_glorot(rng, (hidden, n_relations)),
        out_bias=_zeros(n_relations),
    )
    return ModelParams(prior=prior, context=context, path=path)


class Adam:
    """Adam over named tensors; beta1=0.9, beta2=0.999, eps=1e-8."""

    def __init__(
        self,
        tensors: dict[str, Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.tensors = dict(tensors)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.tensors.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in self.tensors.items()}

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.tensors.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


class RelationPredictor:
    """Bundles graph, embeddings, path vocabulary, params, and config.

    Forward evaluation is read-only over params, so per-query calls are
    safe to fan out across threads; training mutates params under a
    single-writer loop.
    """

    def __init__(
        self,
        g: KnowledgeGraph,
        store: EmbeddingStore,
        vocab: PathVocabulary,
        params: ModelParams,
        cfg: TrainConfig,
    ) -> None:
        cfg.validate()
        if store.dim != cfg.prior_dim:
            raise ConfigError(
                f"embedding store dim {store.dim} != configured prior_dim {cfg.prior_dim}"
            )
        self.g = g
        self.store = store
        self.vocab = vocab
        self.params = params
        self.cfg = cfg
        self._static_cache: dict[tuple[int, int, int | None], tuple[QueryStructure, np.ndarray]] = {}

    # -- static per-query structure -------------------------------------

    def query_static(
        self, query: Triplet, exclude=AUTO_EXCLUDE
    ) -> tuple[QueryStructure, np.ndarray]:
        """Cached (neighborhood structure, path-type ids) for a query."""
        from .context import resolve_exclusion

        excluded = resolve_exclusion(self.g, query, exclude)
        key = (query.head, query.tail, excluded)
        hit = self._static_cache.get(key)
        if hit is not None:
            return hit
        structure = structure_for_query(self.g, query, self.cfg.context_layers, excluded)
        paths = enumerate_paths(
            self.g, query.head, query.tail, self.cfg.max_path_len, excluded
        )
        ids = path_ids(paths, self.vocab)
        self._static_cache[key] = (structure, ids)
        return structure, ids

    def path_count(self, query: Triplet, exclude=AUTO_EXCLUDE) -> int:
        _, ids = self.query_static(query, exclude)
        return int(ids.size)

    # -- differentiable forward ------------------------------------------

    def fused_expr(
        self, query: Triplet, exclude=AUTO_EXCLUDE
    ) -> tuple[Tensor, dict[str, Tensor]]:
        """(fused logits, per-branch logit components) for one query."""
        cfg = self.cfg
        mask = cfg.branch_mask
        components: dict[str, Tensor] = {}
        if "prior" in mask:
            h_emb = Tensor(self.store.vector(query.head))
            t_emb = Tensor(self.store.vector(query.tail))
            logits = prior_logits_expr(h_emb, t_emb, self.params.prior)
            if cfg.weight_prior != 1.0:
                logits = logits * cfg.weight_prior
            components["prior"] = logits
        context_rep: Tensor | None = None
        if "context" in mask:
            structure, _ = self.query_static(query, exclude)
            context_rep, logits = context_branch_expr(
                structure, self.store, self.params.context, cfg.k_iters
            )
            if cfg.weight_context != 1.0:
                logits = logits * cfg.weight_context
            components["context"] = logits
        if "path" in mask:
            _, ids = self.query_static(query, exclude)
            if context_rep is not None:
                s_ht = context_rep
            else:
                s_ht = constant(np.zeros(cfg.hidden))
            _, logits = path_branch_expr(ids, s_ht, self.params.path)
            if cfg.weight_path != 1.0:
                logits = logits * cfg.weight_path
            components["path"] = logits
        total: Tensor | None = None
        for branch in BRANCHES:
            if branch in components:
                total = components[branch] if total is None else total + components[branch]
        assert total is not None  # branch_mask nonempty by validate()
        return total, components

    def forward(self, query: Triplet, exclude=AUTO_EXCLUDE) -> Prediction:
        """Fused relation distribution; deterministic tie-broken ranking."""
        with no_grad():
            logits, _ = self.fused_expr(query, exclude)
            probs = logits.softmax().data
        ranked = np.argsort(-probs, kind="stable")
        return Prediction(probs=probs, ranked=ranked)

    def branch_logit_components(
        self, query: Triplet, exclude=AUTO_EXCLUDE
    ) -> dict[str, np.ndarray]:
        """Per-branch logit vectors of the fused forward (for diagnostics)."""
        with no_grad():
            _, components = self.fused_expr(query, exclude)
        return {name: t.data for name, t in components.items()}

    # -- loss and gradients ------------------------------------------------

    def example_loss_expr(self, triplet: Triplet, exclude=AUTO_EXCLUDE) -> Tensor:
        logits, _ = self.fused_expr(triplet, exclude)
        probs = logits.softmax()
        return -probs.index(triplet.relation).log_clamped()

    def loss(self, batch: list[Triplet]) -> float:
        """Sum of per-example cross-entropies, query edges excluded."""
        if not batch:
            raise ConfigError("loss requires a nonempty batch")
        with no_grad():
            return float(
                math.fsum(self.example_loss_expr(t).data for t in batch)
            )

    def backward(self, batch: list[Triplet]) -> float:
        """Accumulate exact gradients of loss(batch) into params; returns loss."""
        if not batch:
            raise ConfigError("backward requires a nonempty batch")
        total = 0.0
        for triplet in batch:
            loss_t = self.example_loss_expr(triplet)
            loss_t.backward()
            total += float(loss_t.data)
        return total

    def zero_grad(self) -> None:
        for p in self.params.tensors().values():
            p.zero_grad()

    # -- inference -----------------------------------------------------------

    def predict(self, head: str, tail: str, k: int) -> list[tuple[str, float]]:
        """Top-k (relation name, probability), k clamped to |R|."""
        unknown = [name for name in (head, tail) if name not in self.g.entities]
        if unknown:
            raise UnknownEntityError(
                "unknown entities: " + ", ".join(repr(n) for n in unknown)
            )
        h = self.g.entities.id(head)
        t = self.g.entities.id(tail)
        k = max(1, min(k, self.g.n_relations))
        pred = self.forward(Triplet(h, UNKNOWN_RELATION, t))
        return [
            (self.g.relations.name(int(r)), float(pred.probs[int(r)]))
            for r in pred.ranked[:k]
        ]


def build_model(
    g: KnowledgeGraph, store: EmbeddingStore, cfg: TrainConfig
) -> RelationPredictor:
    """Fresh model: path vocabulary from train queries, seeded params."""
    cfg.validate()
    vocab = build_path_vocab(g, g.train, cfg.max_path_len)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(rng, g.n_relations, vocab.size, cfg)
    return RelationPredictor(g, store, vocab, params, cfg)


def train(
    g: KnowledgeGraph,
    store: EmbeddingStore,
    cfg: TrainConfig,
    log_path=None,
    progress=None,
) -> tuple[RelationPredictor, list[dict]]:
    """Adam training loop; deterministic given (seed, config, data).

    Returns the trained model and the per-epoch metrics log. Masked
    branches are never touched by the optimizer. Non-finite loss aborts.
    """
    from .metrics import evaluate

    model = build_model(g, store, cfg)
    optimizer = Adam(model.params.branch_tensors(cfg.branch_mask), cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    n = len(g.train)
    log: list[dict] = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, cfg.batch_size):
                batch = [g.train[i] for i in order[start : start + cfg.batch_size]]
                model.zero_grad()
                batch_loss = model.backward(batch)
                if not math.isfinite(batch_loss):
                    raise RuntimeError(
                        f"non-finite loss {batch_loss} at epoch {epoch}, "
                        f"batch starting {start}; aborting"
                    )
                optimizer.step()
                epoch_loss += batch_loss
            record = {"epoch": epoch, "train_loss": epoch_loss / n}
            if g.valid:
                report = evaluate(g.valid, model, buckets_by="none")
                record["valid_mrr"] = report.mrr
                record["valid_h1"] = report.hits1
                record["valid_h3"] = report.hits3
            log.append(record)
            if log_fh:
                log_fh.write(json.dumps(record, sort_keys=True) + "\n")
                log_fh.flush()
            if progress:
                progress(record)
    finally:
        if log_fh:
            log_fh.close()
    return model, log


# -- checkpoint format -------------------------------------------------------


def save_checkpoint(path, model: RelationPredictor) -> None:
    """Write magic, canonical-JSON config echo, then all tensors as f32."""
    echo = {
        "config": model.cfg.to_dict(),
        "n_relations": model.g.n_relations,
        "path_vocab_size": model.vocab.size,
    }
    blob = json.dumps(echo, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        named = model.params.tensors()
        for name in sorted(named):
            data = np.asarray(named[name].data, dtype="<f4")
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse a checkpoint into (config echo, tensor map); strict format."""
    with open(path, "rb") as fh:
        raw = fh.read()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(raw):
            raise CheckpointError(
                f"{path}: truncated while reading {what} at offset {pos}"
            )
        chunk = raw[pos : pos + n]
        pos += n
        return chunk

    magic = take(len(CKPT_MAGIC), "magic")
    if magic != CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    echo_len = struct.unpack("<I", take(4, "config length"))[0]
    try:
        echo = json.loads(take(echo_len, "config echo").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: invalid config echo: {exc}") from exc
    tensors: dict[str, np.ndarray] = {}
    while pos < len(raw):
        name_len = struct.unpack("<I", take(4, "tensor name length"))[0]
        name = take(name_len, "tensor name").decode("utf-8")
        rank = struct.unpack("<I", take(4, "tensor rank"))[0]
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "tensor dims"))
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        data = np.frombuffer(take(4 * count, f"tensor {name} data"), dtype="<f4")
        tensors[name] = data.reshape(dims).astype(np.float64)
    return echo, tensors


def load_model(
    path, g: KnowledgeGraph, store: EmbeddingStore
) -> RelationPredictor:
    """Rebuild a model from a checkpoint against a loaded dataset.

    The path vocabulary is reconstructed deterministically from the
    train split; its size must match the checkpointed embedding table.
    """
    echo, tensors = read_checkpoint(path)
    try:
        cfg = TrainConfig.from_dict(echo["config"])
        n_relations = echo["n_relations"]
        vocab_size = echo["path_vocab_size"]
    except (KeyError, TypeError, ConfigError) as exc:
        raise CheckpointError(f"{path}: bad config echo: {exc}") from exc
    if n_relations != g.n_relations:
        raise CheckpointError(
            f"{path}: checkpoint has {n_relations} relations, dataset has {g.n_relations}"
        )
    vocab = build_path_vocab(g, g.train, cfg.max_path_len)
    if vocab.size != vocab_size:
        raise CheckpointError(
            f"{path}: rebuilt path vocabulary size {vocab.size} != "
            f"checkpointed {vocab_size}; dataset changed since training"
        )
    rng = np.random.default_rng(cfg.seed)
    params = init_params(rng, n_relations, vocab.size, cfg)
    named = params.tensors()
    if set(named) != set(tensors):
        missing = sorted(set(named) - set(tensors))
        extra = sorted(set(tensors) - set(named))
        raise CheckpointError(
            f"{path}: tensor name mismatch (missing {missing}, unexpected {extra})"
        )
    for name, arr in tensors.items():
        if named[name].data.shape != arr.shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {arr.shape}, "
                f"expected {named[name].data.shape}"
            )
        named[name].data = arr
    return RelationPredictor(g, store, vocab, params, cfg)
