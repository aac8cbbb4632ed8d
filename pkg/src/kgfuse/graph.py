"""Triplet dataset loading, vocabularies, adjacency, and degree buckets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import NamedTuple

from .errors import DatasetError, UnknownEntityError

SPLIT_FILES = ("train.txt", "valid.txt", "test.txt")

# Entities with train degree below this bound sit in the limited-information
# bucket; everything else is rich-information. The boundary is configurable
# at the call sites that take a `lis_bound`.
LIS_DEGREE_BOUND = 3


class Direction(IntEnum):
    FWD = 0
    BWD = 1


class Triplet(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass
class DegreeRecord:
    entity: int
    in_degree: int
    out_degree: int
    degree: int
    bucket: str  # "LIS" or "RIS"


class Vocabulary:
    """Bijective name <-> id map, ids assigned in first-appearance order."""

    def __init__(self) -> None:
        self._names: list[str] = []
        self._ids: dict[str, int] = {}

    def add(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise UnknownEntityError(f"unknown name: {name!r}") from None

    def name(self, idx: int) -> str:
        return self._names[idx]

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    def names(self) -> list[str]:
        return list(self._names)


@dataclass
class KnowledgeGraph:
    """Immutable triplet store; adjacency indexes train edges only."""

    entities: Vocabulary
    relations: Vocabulary
    train: list[Triplet]
    valid: list[Triplet]
    test: list[Triplet]
    # incident[v] lists (edge_id, direction) over train edges, ascending
    # edge id; a self-loop contributes two entries at the same entity.
    incident: list[list[tuple[int, Direction]]] = field(default_factory=list)
    _train_index: dict[Triplet, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.incident:
            self.incident = [[] for _ in range(len(self.entities))]
            for eid, t in enumerate(self.train):
                self.incident[t.head].append((eid, Direction.FWD))
                self.incident[t.tail].append((eid, Direction.BWD))
        if not self._train_index:
            for eid, t in enumerate(self.train):
                self._train_index.setdefault(t, eid)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def check_entity(self, v: int) -> None:
        if not 0 <= v < len(self.entities):
            raise UnknownEntityError(f"entity id out of range: {v}")

    def find_train_edge(self, t: Triplet) -> int | None:
        """Edge id of the first train triplet equal to t, if any."""
        return self._train_index.get(t)


def _parse_split(path: Path, entities: Vocabulary, relations: Vocabulary) -> list[Triplet]:
    triplets: list[Triplet] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            fields = line.split("\t")
            if len(fields) != 3:
                raise DatasetError(
                    f"{path.name}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            h, r, t = fields
            triplets.append(Triplet(entities.add(h), relations.add(r), entities.add(t)))
    return triplets


def load_dataset(dir_path: str | Path) -> KnowledgeGraph:
    """Load train/valid/test triplet files from a dataset directory.

    Vocabularies cover the union of all splits so held-out entities get
    ids; adjacency covers train only, so those entities simply have empty
    incident lists.
    """
    root = Path(dir_path)
    if not root.is_dir():
        raise DatasetError(f"dataset directory not found: {root}")
    entities = Vocabulary()
    relations = Vocabulary()
    splits = []
    for name in SPLIT_FILES:
        path = root / name
        if not path.exists():
            raise DatasetError(f"missing split file: {path}")
        splits.append(_parse_split(path, entities, relations))
    train, valid, test = splits
    if not train:
        raise DatasetError(f"empty train file: {root / 'train.txt'}")
    return KnowledgeGraph(entities, relations, train, valid, test)


def entity_degree(g: KnowledgeGraph, v: int, lis_bound: int = LIS_DEGREE_BOUND) -> DegreeRecord:
    """Train-edge degree counts and the LIS/RIS bucket for one entity."""
    g.check_entity(v)
    out_degree = sum(1 for _, d in g.incident[v] if d == Direction.FWD)
    in_degree = len(g.incident[v]) - out_degree
    degree = in_degree + out_degree
    bucket = "LIS" if degree < lis_bound else "RIS"
    return DegreeRecord(v, in_degree, out_degree, degree, bucket)


def incident_edges(
    g: KnowledgeGraph, v: int, exclude: int | None = None
) -> list[tuple[int, Direction]]:
    """Train edges touching v, ascending edge id, minus `exclude` if given."""
    g.check_entity(v)
    if exclude is None:
        return list(g.incident[v])
    return [(e, d) for e, d in g.incident[v] if e != exclude]


def degree_stats(g: KnowledgeGraph, lis_bound: int = LIS_DEGREE_BOUND) -> dict:
    """Mean/variance of entity degree and the LIS share, over all entities."""
    n = g.n_entities
    degrees = [len(g.incident[v]) for v in range(n)]
    mean = sum(degrees) / n
    variance = sum((d - mean) ** 2 for d in degrees) / n
    lis = sum(1 for d in degrees if d < lis_bound)
    return {
        "mean_degree": mean,
        "degree_variance": variance,
        "lis_fraction": lis / n,
        "max_degree": max(degrees),
    }
