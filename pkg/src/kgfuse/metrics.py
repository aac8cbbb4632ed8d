"""Ranking metrics (MRR, H@1, H@3) and sparsity breakdowns.

Per-query values are exact rationals in float; reductions use math.fsum
so results are independent of query order and worker count.
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigError
from .graph import Triplet, entity_degree

if TYPE_CHECKING:
    from .model import Prediction, RelationPredictor

BUCKET_MODES = ("none", "lis_ris", "degree", "path_count")


@dataclass
class BucketStats:
    mrr: float
    hits1: float
    hits3: float
    n: int


@dataclass
class EvalReport:
    mrr: float
    hits1: float
    hits3: float
    n: int
    buckets: dict[str, BucketStats] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mrr": self.mrr,
            "hits1": self.hits1,
            "hits3": self.hits3,
            "n": self.n,
            "buckets": {
                label: {"mrr": s.mrr, "hits1": s.hits1, "hits3": s.hits3, "n": s.n}
                for label, s in self.buckets.items()
            },
        }

    def table(self) -> str:
        rows = [("overall", self.n, self.mrr, self.hits1, self.hits3)]
        for label in sorted(self.buckets, key=_bucket_sort_key):
            s = self.buckets[label]
            rows.append((label, s.n, s.mrr, s.hits1, s.hits3))
        width = max(len(r[0]) for r in rows)
        lines = [f"{'bucket':<{width}}  {'n':>6}  {'MRR':>7}  {'H@1':>7}  {'H@3':>7}"]
        for label, n, mrr, h1, h3 in rows:
            lines.append(f"{label:<{width}}  {n:>6d}  {mrr:>7.4f}  {h1:>7.4f}  {h3:>7.4f}")
        return "\n".join(lines)


def _bucket_sort_key(label: str) -> tuple[str, int]:
    match = re.match(r"^(\D*)(\d+)$", label)
    if match:
        return (match.group(1), int(match.group(2)))
    return (label, -1)


def rank_of_truth(pred: "Prediction", r: int) -> int:
    """1-based position of relation r in the tie-broken ranking."""
    if not 0 <= r < pred.ranked.size:
        raise ConfigError(f"relation id {r} out of range for {pred.ranked.size} relations")
    return int(np.nonzero(pred.ranked == r)[0][0]) + 1


def _bucket_label(model: "RelationPredictor", query: Triplet, mode: str) -> str:
    g = model.g
    if mode == "lis_ris":
        rec_h = entity_degree(g, query.head)
        rec_t = entity_degree(g, query.tail)
        return rec_h.bucket if rec_h.degree <= rec_t.degree else rec_t.bucket
    if mode == "degree":
        degree = min(
            entity_degree(g, query.head).degree, entity_degree(g, query.tail).degree
        )
        return f"deg={degree}"
    if mode == "path_count":
        return f"paths={model.path_count(query)}"
    raise ConfigError(f"unknown bucket mode: {mode!r}")


def evaluate(
    split: list[Triplet],
    model: "RelationPredictor",
    buckets_by: str = "none",
    workers: int = 1,
) -> EvalReport:
    """Rank the true relation for every query and reduce with fsum.

    Train-split queries exclude their own edge automatically; held-out
    queries match no train edge so exclusion is a no-op. Worker count
    affects scheduling only: per-query values are reduced in split order.
    """
    if not split:
        raise ConfigError("cannot evaluate an empty split")
    if buckets_by not in BUCKET_MODES:
        raise ConfigError(f"buckets_by must be one of {BUCKET_MODES}, got {buckets_by!r}")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    def assess(query: Triplet) -> int:
        return rank_of_truth(model.forward(query), query.relation)

    if workers == 1:
        ranks = [assess(q) for q in split]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ranks = list(pool.map(assess, split))

    def stats(values: list[int]) -> tuple[float, float, float]:
        n = len(values)
        mrr = math.fsum(1.0 / r for r in values) / n
        h1 = math.fsum(1.0 if r <= 1 else 0.0 for r in values) / n
        h3 = math.fsum(1.0 if r <= 3 else 0.0 for r in values) / n
        return mrr, h1, h3

    mrr, h1, h3 = stats(ranks)
    buckets: dict[str, BucketStats] = {}
    if buckets_by != "none":
        grouped: dict[str, list[int]] = {}
        for query, rank in zip(split, ranks):
            grouped.setdefault(_bucket_label(model, query, buckets_by), []).append(rank)
        for label, values in grouped.items():
            b_mrr, b_h1, b_h3 = stats(values)
            buckets[label] = BucketStats(b_mrr, b_h1, b_h3, len(values))
    return EvalReport(mrr=mrr, hits1=h1, hits3=h3, n=len(split), buckets=buckets)
