"""Relation prediction over knowledge graphs.

Fuses three evidence sources for a (head, tail) query: prior knowledge
from entity description embeddings, relational context aggregated by
message passing over incident edges, and relational paths connecting the
pair. All three produce logits over the relation vocabulary and are summed
before a single softmax.
"""

__version__ = "0.1.0"

from .errors import (
    CheckpointError,
    ConfigError,
    DatasetError,
    EmbeddingFormatError,
    KgfuseError,
    UnknownEntityError,
)
from .graph import (
    DegreeRecord,
    Direction,
    KnowledgeGraph,
    Triplet,
    Vocabulary,
    entity_degree,
    incident_edges,
    load_dataset,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DatasetError",
    "DegreeRecord",
    "Direction",
    "EmbeddingFormatError",
    "KgfuseError",
    "KnowledgeGraph",
    "Triplet",
    "UnknownEntityError",
    "Vocabulary",
    "entity_degree",
    "incident_edges",
    "load_dataset",
]
