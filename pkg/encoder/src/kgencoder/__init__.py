"""Text-encoder fine-tuning and embedding export for the relation engine."""

from .corpus import DescriptionCorpus, load_corpus, load_triplets
from .encoder import PairEncoder, encode_batch, pad_batch
from .errors import CheckpointError, CorpusError, KgencoderError
from .export import MAGIC, export_embeddings, write_embedding_file
from .finetune import (
    FinetuneConfig,
    build_examples,
    finetune,
    load_checkpoint,
    majority_share,
    save_checkpoint,
)
from .tokenizer import BUDGET, CLS, PAD, SEP, UNK, WordTokenizer

__all__ = [
    "BUDGET",
    "CLS",
    "CheckpointError",
    "CorpusError",
    "DescriptionCorpus",
    "FinetuneConfig",
    "KgencoderError",
    "MAGIC",
    "PAD",
    "PairEncoder",
    "SEP",
    "UNK",
    "WordTokenizer",
    "build_examples",
    "encode_batch",
    "export_embeddings",
    "finetune",
    "load_checkpoint",
    "load_corpus",
    "load_triplets",
    "majority_share",
    "pad_batch",
    "save_checkpoint",
    "write_embedding_file",
]
