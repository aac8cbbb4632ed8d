"""Per-entity prior embedding vectors and the prior-knowledge logit branch.

Embeddings arrive from an external encoder through a binary file format
(see `read`/`write`); entities absent from the file get a deterministic
fallback vector so the engine stays total over the vocabulary.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat, no_grad
from .errors import EmbeddingFormatError, UnknownEntityError
from .graph import KnowledgeGraph

MAGIC = b"MUSEEMB1"


@dataclass
class EmbeddingStore:
    """Immutable per-entity vectors; safe for concurrent reads."""

    dim: int
    vectors: dict[int, np.ndarray]
    source: str  # "file" or "fallback"
    from_file: set[int] = field(default_factory=set)

    def vector(self, v: int) -> np.ndarray:
        return self.vectors[v]


@dataclass
class PriorBranchParams:
    """2-layer MLP over the concatenated (head, tail) prior embeddings."""

    mlp_w1: Tensor  # (2*dim, hidden)
    mlp_b1: Tensor  # (hidden,)
    mlp_w2: Tensor  # (hidden, n_relations)
    mlp_b2: Tensor  # (n_relations,)

    def tensors(self) -> dict[str, Tensor]:
        return {
            "prior.mlp_w1": self.mlp_w1,
            "prior.mlp_b1": self.mlp_b1,
            "prior.mlp_w2": self.mlp_w2,
            "prior.mlp_b2": self.mlp_b2,
        }


def fallback_embedding(name: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit-norm vector derived from (name, seed).

    Stable across runs and platforms: the generator is seeded from a
    blake2b digest of the name and the integer seed.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    digest = hashlib.blake2b(
        name.encode("utf-8") + struct.pack("<q", seed), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    vec = rng.standard_normal(dim)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        norm = 1.0
    return vec / norm


def fallback_store(g: KnowledgeGraph, dim: int, seed: int = 0) -> EmbeddingStore:
    """Store where every entity resolves to its fallback vector."""
    vectors = {
        v: fallback_embedding(g.entities.name(v), dim, seed) for v in range(g.n_entities)
    }
    return EmbeddingStore(dim=dim, vectors=vectors, source="fallback")


class _Cursor:
    """Sequential reader over a byte buffer with truncation checks."""

    def __init__(self, data: bytes, label: str) -> None:
        self.data = data
        self.pos = 0
        self.label = label

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise EmbeddingFormatError(
                f"{self.label}: truncated while reading {what} "
                f"(need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos})"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_embeddings(
    path, g: KnowledgeGraph, fallback_seed: int = 0
) -> EmbeddingStore:
    """Read an embedding file and resolve every graph entity.

    File layout (little-endian): magic ``MUSEEMB1``; u32 count; u32 dim;
    then `count` records of [u32 name_len, UTF-8 name, dim x f32].
    Entities not named in the file fall back deterministically.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    cur = _Cursor(raw, str(path))
    magic = cur.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    count = cur.u32("record count")
    dim = cur.u32("dimension")
    if dim < 1:
        raise EmbeddingFormatError(f"{path}: dimension must be >= 1, got {dim}")
    vectors: dict[int, np.ndarray] = {}
    for i in range(count):
        name_len = cur.u32(f"record {i} name length")
        name = cur.take(name_len, f"record {i} name").decode("utf-8")
        vec_bytes = cur.take(4 * dim, f"record {i} vector")
        if name not in g.entities:
            raise UnknownEntityError(
                f"{path}: record {i} names unknown entity {name!r}"
            )
        v = g.entities.id(name)
        if v in vectors:
            raise EmbeddingFormatError(f"{path}: duplicate record for entity {name!r}")
        vectors[v] = np.frombuffer(vec_bytes, dtype="<f4").astype(np.float64)
    if cur.pos != len(raw):
        raise EmbeddingFormatError(
            f"{path}: {len(raw) - cur.pos} trailing bytes after {count} records"
        )
    from_file = set(vectors)
    for v in range(g.n_entities):
        if v not in vectors:
            vectors[v] = fallback_embedding(g.entities.name(v), dim, fallback_seed)
    return EmbeddingStore(dim=dim, vectors=vectors, source="file", from_file=from_file)


def write_embeddings(path, entries: list[tuple[str, np.ndarray]], dim: int) -> None:
    """Write vectors in the binary embedding format (f32 payload)."""
    for name, vec in entries:
        if len(vec) != dim:
            raise EmbeddingFormatError(
                f"vector for {name!r} has length {len(vec)}, expected {dim}"
            )
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", len(entries), dim))
        for name, vec in entries:
            blob = name.encode("utf-8")
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


def prior_logits_expr(
    h_emb: Tensor, t_emb: Tensor, params: PriorBranchParams
) -> Tensor:
    """Differentiable prior branch: MLP over concat(emb(h), emb(t))."""
    x = concat([h_emb, t_emb])
    hidden = ((x @ params.mlp_w1) + params.mlp_b1).relu()
    return (hidden @ params.mlp_w2) + params.mlp_b2


def prior_logits(
    h: int, t: int, store: EmbeddingStore, params: PriorBranchParams
) -> np.ndarray:
    """Unnormalized relation logits from the prior branch."""
    if store.dim * 2 != params.mlp_w1.data.shape[0]:
        raise ValueError(
            f"embedding dim {store.dim} incompatible with mlp_w1 input "
            f"size {params.mlp_w1.data.shape[0]}"
        )
    with no_grad():
        out = prior_logits_expr(
            Tensor(store.vector(h)), Tensor(store.vector(t)), params
        )
    return out.data
