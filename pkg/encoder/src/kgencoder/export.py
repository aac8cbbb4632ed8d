"""Per-entity embedding export in the engine's binary file format.

One record per corpus entity, in corpus order: the inference-mode [CLS]
encoding of the entity's description alone. The file layout is the
``MUSEEMB1`` interchange format (little-endian): 8 magic bytes, u32
record count, u32 dimension, then per record [u32 name length, UTF-8
name, dimension x f32].
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .corpus import DescriptionCorpus
from .encoder import PairEncoder, encode_batch
from .errors import CorpusError
from .finetune import FinetuneConfig
from .tokenizer import WordTokenizer

MAGIC = b"MUSEEMB1"


def write_embedding_file(path, entries: list[tuple[str, np.ndarray]], dim: int) -> None:
    """Serialize (name, vector) records; vectors are stored as f32."""
    for name, vec in entries:
        if vec.shape != (dim,):
            raise CorpusError(
                f"vector for {name!r} has shape {vec.shape}, expected ({dim},)"
            )
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", len(entries), dim))
        for name, vec in entries:
            blob = name.encode("utf-8")
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(np.ascontiguousarray(vec, dtype="<f4").tobytes())


def export_embeddings(
    model: PairEncoder,
    tokenizer: WordTokenizer,
    cfg: FinetuneConfig,
    corpus: DescriptionCorpus,
    out_path,
) -> Path:
    """Encode every corpus entity's description and write the file."""
    names = corpus.names
    if not names:
        raise CorpusError("corpus has no entities to export")
    id_lists = [tokenizer.encode_single(corpus.text_for(n), cfg.budget) for n in names]
    vectors = encode_batch(model, id_lists)
    out = Path(out_path)
    write_embedding_file(out, list(zip(names, vectors)), vectors.shape[1])
    return out
