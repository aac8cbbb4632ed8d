"""Shared fixtures: tiny datasets written to disk the way loaders expect."""

import numpy as np
import pytest

from kgfuse.graph import load_dataset


def write_split(path, triplets):
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in triplets:
            fh.write(f"{h}\t{r}\t{t}\n")


def make_dataset(root, train, valid=(), test=()):
    root.mkdir(parents=True, exist_ok=True)
    write_split(root / "train.txt", train)
    write_split(root / "valid.txt", valid)
    write_split(root / "test.txt", test)
    return root


@pytest.fixture
def toy_graph(tmp_path):
    """5 entities, 3 relations, a triangle plus a pendant and a self-loop."""
    train = [
        ("a", "r1", "b"),
        ("b", "r2", "c"),
        ("a", "r3", "c"),
        ("c", "r1", "d"),
        ("d", "r2", "d"),
    ]
    valid = [("a", "r2", "d")]
    test = [("b", "r3", "d"), ("e", "r1", "a")]
    return load_dataset(make_dataset(tmp_path / "toy", train, valid, test))


def random_graph_files(tmp_path, rng, n_entities, n_edges, n_relations, name="rand"):
    """Random multigraph dataset on disk; returns the loaded graph.

    The valid split walks every entity and relation once so the
    vocabularies always cover the full id range, independent of which
    names the random train edges happened to hit.
    """
    entities = [f"e{i}" for i in range(n_entities)]
    relations = [f"r{i}" for i in range(n_relations)]
    train = []
    for _ in range(n_edges):
        h = entities[rng.integers(n_entities)]
        t = entities[rng.integers(n_entities)]
        r = relations[rng.integers(n_relations)]
        train.append((h, r, t))
    valid = [
        (entities[i], relations[i % n_relations], entities[(i + 1) % n_entities])
        for i in range(n_entities)
    ]
    test = [valid[0]]
    return load_dataset(make_dataset(tmp_path / name, train, valid, test))


@pytest.fixture
def rng():
    return np.random.default_rng(42)
