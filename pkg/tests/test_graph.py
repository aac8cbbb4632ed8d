"""Dataset loading, vocabulary order, adjacency, and degree buckets."""

import numpy as np
import pytest

from kgfuse.errors import DatasetError, UnknownEntityError
from kgfuse.graph import (
    Direction,
    Triplet,
    degree_stats,
    entity_degree,
    incident_edges,
    load_dataset,
)

from conftest import make_dataset, random_graph_files, write_split


class TestLoading:
    def test_vocab_first_appearance_order(self, toy_graph):
        """Ids follow first appearance across train, then valid, then test."""
        g = toy_graph
        assert g.entities.names() == ["a", "b", "c", "d", "e"]
        assert g.relations.names() == ["r1", "r2", "r3"]
        assert g.train[0] == Triplet(0, 0, 1)

    def test_vocab_covers_all_splits(self, toy_graph):
        """Entities appearing only in held-out splits still get ids."""
        g = toy_graph
        assert "e" in g.entities
        assert g.incident[g.entities.id("e")] == []

    def test_counts(self, toy_graph):
        assert len(toy_graph.train) == 5
        assert len(toy_graph.valid) == 1
        assert len(toy_graph.test) == 2
        assert toy_graph.n_entities == 5
        assert toy_graph.n_relations == 3

    def test_missing_dir(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "nope")

    def test_missing_split(self, tmp_path):
        root = tmp_path / "d"
        root.mkdir()
        write_split(root / "train.txt", [("a", "r", "b")])
        with pytest.raises(DatasetError, match="valid.txt"):
            load_dataset(root)

    def test_malformed_line(self, tmp_path):
        root = tmp_path / "d"
        root.mkdir()
        with open(root / "train.txt", "w") as fh:
            fh.write("a\tr\tb\n")
            fh.write("only two\tfields\n")
        write_split(root / "valid.txt", [])
        write_split(root / "test.txt", [])
        with pytest.raises(DatasetError, match="train.txt:2"):
            load_dataset(root)

    def test_empty_train(self, tmp_path):
        root = make_dataset(tmp_path / "d", [])
        with pytest.raises(DatasetError, match="empty train"):
            load_dataset(root)

    def test_unknown_entity_lookup(self, toy_graph):
        with pytest.raises(UnknownEntityError):
            toy_graph.entities.id("zzz")


class TestAdjacency:
    def test_each_train_edge_twice(self, toy_graph):
        """Every train edge contributes exactly two incident entries."""
        total = sum(len(lst) for lst in toy_graph.incident)
        assert total == 2 * len(toy_graph.train)

    def test_self_loop_two_entries_same_entity(self, toy_graph):
        d = toy_graph.entities.id("d")
        entries = [(e, dirn) for e, dirn in toy_graph.incident[d] if e == 4]
        assert entries == [(4, Direction.FWD), (4, Direction.BWD)]

    def test_incident_ascending_edge_id(self, tmp_path, rng):
        g = random_graph_files(tmp_path, rng, 8, 30, 3)
        for v in range(g.n_entities):
            ids = [e for e, _ in g.incident[v]]
            assert ids == sorted(ids)

    def test_incident_edges_exclusion(self, toy_graph):
        a = toy_graph.entities.id("a")
        with_all = incident_edges(toy_graph, a)
        without = incident_edges(toy_graph, a, exclude=0)
        assert (0, Direction.FWD) in with_all
        assert all(e != 0 for e, _ in without)
        assert len(without) == len(with_all) - 1

    def test_find_train_edge(self, toy_graph):
        g = toy_graph
        assert g.find_train_edge(g.train[2]) == 2
        assert g.find_train_edge(Triplet(0, 1, 3)) is None


class TestDegrees:
    def test_toy_degrees(self, toy_graph):
        """Hand-counted degrees on the fixture graph."""
        g = toy_graph
        rec_a = entity_degree(g, g.entities.id("a"))
        assert (rec_a.in_degree, rec_a.out_degree, rec_a.degree) == (0, 2, 2)
        assert rec_a.bucket == "LIS"
        rec_c = entity_degree(g, g.entities.id("c"))
        assert (rec_c.in_degree, rec_c.out_degree, rec_c.degree) == (2, 1, 3)
        assert rec_c.bucket == "RIS"
        rec_d = entity_degree(g, g.entities.id("d"))
        assert (rec_d.in_degree, rec_d.out_degree) == (2, 1)

    def test_degree_bound_boundary(self, toy_graph):
        """degree < bound is LIS; degree == bound is RIS."""
        g = toy_graph
        c = g.entities.id("c")
        assert entity_degree(g, c, lis_bound=3).bucket == "RIS"
        assert entity_degree(g, c, lis_bound=4).bucket == "LIS"

    def test_degree_matches_brute_force(self, tmp_path, rng):
        """in/out/degree equal direct counts over the triplet list."""
        for trial in range(5):
            g = random_graph_files(tmp_path, rng, 10, 40, 4, name=f"r{trial}")
            for v in range(g.n_entities):
                rec = entity_degree(g, v)
                out_naive = sum(1 for t in g.train if t.head == v)
                in_naive = sum(1 for t in g.train if t.tail == v)
                assert rec.out_degree == out_naive
                assert rec.in_degree == in_naive
                assert rec.degree == in_naive + out_naive

    def test_degree_stats_oracle(self, tmp_path, rng):
        """Mean/variance/LIS share match numpy recomputation."""
        g = random_graph_files(tmp_path, rng, 12, 50, 4, name="stats")
        stats = degree_stats(g)
        degs = np.array(
            [entity_degree(g, v).degree for v in range(g.n_entities)], dtype=float
        )
        assert stats["mean_degree"] == pytest.approx(degs.mean())
        assert stats["degree_variance"] == pytest.approx(degs.var())
        assert stats["lis_fraction"] == pytest.approx((degs < 3).mean())
        assert stats["max_degree"] == degs.max()
