"""Metric arithmetic, tie-breaking, buckets, and reduction invariance."""

import math

import numpy as np
import pytest

from kgfuse.errors import ConfigError
from kgfuse.graph import Triplet
from kgfuse.metrics import evaluate, rank_of_truth
from kgfuse.model import Prediction

from conftest import random_graph_files
from test_model import small_model


def pred_from_probs(probs):
    probs = np.asarray(probs, dtype=float)
    return Prediction(probs=probs, ranked=np.argsort(-probs, kind="stable"))


class TestRankOfTruth:
    def test_top_is_rank_one(self):
        assert rank_of_truth(pred_from_probs([0.1, 0.7, 0.2]), 1) == 1

    def test_uniform_tie_break_ascending(self):
        """With equal probs, rank equals relation id + 1."""
        pred = pred_from_probs([0.25, 0.25, 0.25, 0.25])
        assert [rank_of_truth(pred, r) for r in range(4)] == [1, 2, 3, 4]

    def test_matches_sort_oracle(self, rng):
        for _ in range(50):
            probs = rng.random(6)
            pred = pred_from_probs(probs)
            r = int(rng.integers(6))
            better = sum(1 for p in probs if p > probs[r])
            equal_before = sum(1 for i in range(r) if probs[i] == probs[r])
            assert rank_of_truth(pred, r) == better + equal_before + 1

    def test_out_of_range(self):
        with pytest.raises(ConfigError):
            rank_of_truth(pred_from_probs([0.5, 0.5]), 2)


class FixedRankModel:
    """Stand-in model whose forward yields a scripted rank per query."""

    def __init__(self, g, ranks, n_relations):
        self.g = g
        self._ranks = dict(ranks)
        self.n = n_relations

    def forward(self, query, exclude="auto"):
        rank = self._ranks[(query.head, query.relation, query.tail)]
        probs = np.linspace(1.0, 0.1, self.n)
        order = [r for r in range(self.n) if r != query.relation]
        order.insert(rank - 1, query.relation)
        ranked = np.asarray(order)
        out = np.empty(self.n)
        out[ranked] = probs
        return Prediction(probs=out, ranked=ranked)

    def path_count(self, query, exclude="auto"):
        return 0


class TestEvaluate:
    def test_hand_computed_mrr(self, tmp_path, rng):
        """Ranks [1, 2, 4] give MRR (1 + 1/2 + 1/4)/3 = 0.58333..."""
        g = random_graph_files(tmp_path, rng, 6, 12, 5, name="m1")
        split = g.valid[:3]
        ranks = {(q.head, q.relation, q.tail): r for q, r in zip(split, (1, 2, 4))}
        model = FixedRankModel(g, ranks, 5)
        report = evaluate(split, model)
        assert report.mrr == pytest.approx((1 + 0.5 + 0.25) / 3, abs=1e-12)
        assert report.hits1 == pytest.approx(1 / 3)
        assert report.hits3 == pytest.approx(2 / 3)
        assert report.n == 3

    def test_all_rank_one(self, tmp_path, rng):
        g = random_graph_files(tmp_path, rng, 6, 12, 4, name="m2")
        split = g.valid[:4]
        ranks = {(q.head, q.relation, q.tail): 1 for q in split}
        report = evaluate(split, FixedRankModel(g, ranks, 4))
        assert report.mrr == report.hits1 == report.hits3 == 1.0

    def test_empty_split(self, tmp_path, rng):
        g = random_graph_files(tmp_path, rng, 6, 12, 3, name="m3")
        with pytest.raises(ConfigError):
            evaluate([], FixedRankModel(g, {}, 3))

    def test_permutation_invariance(self, tmp_path, rng):
        """Metrics are identical for any ordering of the split."""
        g = random_graph_files(tmp_path, rng, 8, 20, 4, name="m4")
        model = small_model(g)
        split = list(g.valid)
        base = evaluate(split, model)
        shuffled = list(split)
        rng.shuffle(shuffled)
        other = evaluate(shuffled, model)
        assert base.mrr == other.mrr
        assert base.hits1 == other.hits1
        assert base.hits3 == other.hits3

    def test_workers_do_not_change_results(self, tmp_path, rng):
        g = random_graph_files(tmp_path, rng, 8, 20, 4, name="m5")
        model = small_model(g)
        split = list(g.valid)
        a = evaluate(split, model, workers=1)
        b = evaluate(split, model, workers=4)
        assert a.to_dict() == b.to_dict()

    def test_bounds(self, tmp_path, rng):
        g = random_graph_files(tmp_path, rng, 8, 20, 4, name="m6")
        model = small_model(g)
        report = evaluate(list(g.valid), model)
        assert 1 / g.n_relations <= report.mrr <= 1.0
        assert report.hits1 <= report.hits3 <= 1.0


class TestBuckets:
    def test_lis_ris_partition(self, tmp_path, rng):
        g = random_graph_files(tmp_path, rng, 8, 20, 3, name="b1")
        model = small_model(g)
        report = evaluate(list(g.valid), model, buckets_by="lis_ris")
        assert set(report.buckets) <= {"LIS", "RIS"}
        assert sum(s.n for s in report.buckets.values()) == report.n

    def test_degree_bucket_key_is_min_endpoint(self, tmp_path, rng):
        from kgfuse.graph import entity_degree

        g = random_graph_files(tmp_path, rng, 8, 20, 3, name="b2")
        model = small_model(g)
        report = evaluate(list(g.valid), model, buckets_by="degree")
        labels = {
            f"deg={min(entity_degree(g, q.head).degree, entity_degree(g, q.tail).degree)}"
            for q in g.valid
        }
        assert set(report.buckets) == labels

    def test_path_count_buckets(self, tmp_path, rng):
        g = random_graph_files(tmp_path, rng, 8, 20, 3, name="b3")
        model = small_model(g)
        report = evaluate(list(g.valid), model, buckets_by="path_count")
        labels = {f"paths={model.path_count(q)}" for q in g.valid}
        assert set(report.buckets) == labels

    def test_recombination_identity(self, tmp_path, rng):
        """Sum_b n_b * mrr_b / n equals the overall MRR."""
        g = random_graph_files(tmp_path, rng, 10, 30, 4, name="b4")
        model = small_model(g)
        for mode in ("lis_ris", "degree", "path_count"):
            report = evaluate(list(g.valid), model, buckets_by=mode)
            for metric in ("mrr", "hits1", "hits3"):
                combined = (
                    math.fsum(
                        getattr(s, metric) * s.n for s in report.buckets.values()
                    )
                    / report.n
                )
                assert combined == pytest.approx(getattr(report, metric), abs=1e-12)

    def test_bad_mode(self, tmp_path, rng):
        g = random_graph_files(tmp_path, rng, 6, 12, 3, name="b5")
        with pytest.raises(ConfigError):
            evaluate(list(g.valid), small_model(g), buckets_by="nope")


class TestReport:
    def test_table_alignment(self, tmp_path, rng):
        g = random_graph_files(tmp_path, rng, 8, 20, 3, name="r1")
        model = small_model(g)
        report = evaluate(list(g.valid), model, buckets_by="lis_ris")
        text = report.table()
        lines = text.splitlines()
        assert lines[0].split() == ["bucket", "n", "MRR", "H@1", "H@3"]
        assert len(lines) == 1 + 1 + len(report.buckets)
        assert lines[1].startswith("overall")

    def test_to_dict_json_ready(self, tmp_path, rng):
        import json

        g = random_graph_files(tmp_path, rng, 8, 20, 3, name="r2")
        report = evaluate(list(g.valid), small_model(g), buckets_by="degree")
        encoded = json.dumps(report.to_dict(), sort_keys=True)
        assert json.loads(encoded)["n"] == report.n
