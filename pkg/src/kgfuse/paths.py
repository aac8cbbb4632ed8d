"""Head-to-tail relational path enumeration and attention aggregation.

A path type is the sequence of (relation, direction) steps alone; the
entities along the walk are deliberately ignored so types are comparable
across queries. Types index into a learned embedding table whose row 0 is
reserved for unseen types.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, constant, no_grad
from .errors import ConfigError
from .graph import Direction, KnowledgeGraph, Triplet

UNK_PATH_ID = 0

Step = tuple[int, Direction]


@dataclass(frozen=True)
class RelationalPath:
    """One head-to-tail walk, identified by its step sequence."""

    steps: tuple[Step, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("path must have at least one step")

    @property
    def length(self) -> int:
        return len(self.steps)


@dataclass
class PathVocabulary:
    """Canonical step-sequence -> path-type id; id 0 is reserved for UNK."""

    map: dict[tuple[Step, ...], int]

    @property
    def size(self) -> int:
        return len(self.map)

    def id_of(self, path: RelationalPath) -> int:
        return self.map.get(path.steps, UNK_PATH_ID)


@dataclass
class PathBranchParams:
    """Trainable tensors of the path branch."""

    path_embed: Tensor  # (vocab_size + 1, hidden); row 0 is UNK
    out_proj: Tensor  # (hidden, |R|)
    out_bias: Tensor  # (|R|,)

    def tensors(self) -> dict[str, Tensor]:
        return {
            "path.path_embed": self.path_embed,
            "path.out_proj": self.out_proj,
            "path.out_bias": self.out_bias,
        }


def enumerate_paths(
    g: KnowledgeGraph, h: int, t: int, max_len: int, exclude: int | None = None
) -> list[RelationalPath]:
    """All edge-distinct walks from h to t of length <= max_len.

    Each train edge may be traversed in either direction but at most once
    per walk; the result is ordered lexicographically by step sequence,
    with one entry per walk (distinct walks of equal type both appear).
    """
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    g.check_entity(h)
    g.check_entity(t)
    found: list[tuple[Step, ...]] = []
    used: set[int] = set()
    prefix: list[Step] = []

    def extend(v: int, remaining: int) -> None:
        if v == t and prefix:
            found.append(tuple(prefix))
        if remaining == 0:
            return
        for e, direction in g.incident[v]:
            if e == exclude or e in used:
                continue
            trip = g.train[e]
            if direction == Direction.FWD:
                step, nxt = (trip.relation, Direction.FWD), trip.tail
            else:
                step, nxt = (trip.relation, Direction.BWD), trip.head
            used.add(e)
            prefix.append(step)
            extend(nxt, remaining - 1)
            prefix.pop()
            used.discard(e)

    extend(h, max_len)
    found.sort()
    return [RelationalPath(steps) for steps in found]


def build_path_vocab(
    g: KnowledgeGraph, queries: list[Triplet], max_len: int
) -> PathVocabulary:
    """Assign path-type ids in first-appearance order over train queries.

    Each query excludes its own train edge so the vocabulary never
    contains the trivial single-step echo of the label.
    """
    mapping: dict[tuple[Step, ...], int] = {}
    for query in queries:
        exclude = g.find_train_edge(query)
        for path in enumerate_paths(g, query.head, query.tail, max_len, exclude):
            if path.steps not in mapping:
                mapping[path.steps] = len(mapping) + 1
    return PathVocabulary(map=mapping)


def path_ids(paths: list[RelationalPath], vocab: PathVocabulary) -> np.ndarray:
    """Vocabulary ids for a path list, UNK for unseen types."""
    return np.asarray([vocab.id_of(p) for p in paths], dtype=np.int64)


def path_branch_expr(
    ids: np.ndarray, s_ht: Tensor, params: PathBranchParams
) -> tuple[Tensor, Tensor]:
    """Differentiable path branch: (aggregated representation, logits).

    Attention scores dot each path embedding against the context pair
    representation; a zero s_ht degrades to uniform (mean) pooling.
    """
    hidden = params.path_embed.data.shape[1]
    if ids.size == 0:
        rep = constant(np.zeros(hidden))
    else:
        rows = params.path_embed.gather_rows(ids)
        alpha = (rows @ s_ht).softmax()
        rep = alpha @ rows
    logits = (rep @ params.out_proj) + params.out_bias
    return rep, logits


def aggregate_paths(
    paths: list[RelationalPath],
    s_ht: np.ndarray,
    vocab: PathVocabulary,
    params: PathBranchParams,
) -> np.ndarray:
    """Attention-weighted sum of path embeddings; zero vector if no paths."""
    if s_ht.shape[0] != params.path_embed.data.shape[1]:
        raise ConfigError(
            f"s_ht length {s_ht.shape[0]} incompatible with path embedding "
            f"width {params.path_embed.data.shape[1]}"
        )
    with no_grad():
        rep, _ = path_branch_expr(path_ids(paths, vocab), Tensor(s_ht), params)
    return rep.data


def path_logits(rep: np.ndarray, params: PathBranchParams) -> np.ndarray:
    """Project the aggregated path representation to relation logits."""
    if rep.shape[0] != params.out_proj.data.shape[0]:
        raise ConfigError(
            f"rep length {rep.shape[0]} incompatible with out_proj rows "
            f"{params.out_proj.data.shape[0]}"
        )
    return rep @ params.out_proj.data + params.out_bias.data
