"""Edge-based relational message passing over a query's neighborhood.

Edge states start as per-relation embeddings, are updated for K sweeps
from the endpoint node messages, then pooled at the query endpoints with
prior-embedding attention into a pair representation and context logits.

Two surfaces share the math: per-edge operations (`node_message`,
`edge_update`, `edge_attention`) spell out single steps in plain numpy,
while `structure_for_query` + `context_branch_expr` run the whole branch
as one batched differentiable expression; `pair_representation` wraps the
batched form. Tests hold the two routes together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, constant, no_grad
from .embeddings import EmbeddingStore
from .errors import ConfigError
from .graph import Direction, KnowledgeGraph, Triplet

AUTO_EXCLUDE = "auto"


@dataclass
class ContextBranchParams:
    """All trainable tensors of the context branch."""

    rel_embed: Tensor  # (|R|, hidden): initial edge state per relation
    w: list[Tensor]  # per sweep d: (3*hidden, hidden)
    b: list[Tensor]  # per sweep d: (hidden,)
    w_pair: Tensor  # (2*hidden, hidden)
    b_pair: Tensor  # (hidden,)
    attn_proj: Tensor  # (prior_dim, hidden)
    out_proj: Tensor  # (hidden, |R|)
    out_bias: Tensor  # (|R|,)

    def tensors(self) -> dict[str, Tensor]:
        named = {
            "context.rel_embed": self.rel_embed,
            "context.w_pair": self.w_pair,
            "context.b_pair": self.b_pair,
            "context.attn_proj": self.attn_proj,
            "context.out_proj": self.out_proj,
            "context.out_bias": self.out_bias,
        }
        for d, (wd, bd) in enumerate(zip(self.w, self.b)):
            named[f"context.w_{d}"] = wd
            named[f"context.b_{d}"] = bd
        return named


@dataclass
class EdgeStateTable:
    """Per-edge hidden vectors for one query's neighborhood."""

    graph: KnowledgeGraph
    states: dict[int, np.ndarray]
    iteration: int
    excluded: int | None

    def __contains__(self, edge: int) -> bool:
        return edge in self.states


def resolve_exclusion(g: KnowledgeGraph, query: Triplet, exclude) -> int | None:
    """Map the exclusion argument to a concrete edge id or None.

    The sentinel "auto" excludes the train edge equal to the query, if
    one exists; queries with an unknown relation sentinel never match.
    """
    if exclude == AUTO_EXCLUDE:
        return g.find_train_edge(query)
    return exclude


def neighborhood_edges(
    g: KnowledgeGraph, h: int, t: int, k_hops: int, exclude: int | None = None
) -> list[int]:
    """Train edges reachable within k_hops of either endpoint, ascending id."""
    if k_hops < 1:
        raise ConfigError(f"k_hops must be >= 1, got {k_hops}")
    g.check_entity(h)
    g.check_entity(t)
    seen = {h, t}
    frontier = {h, t}
    edges: set[int] = set()
    for _ in range(k_hops):
        nxt: set[int] = set()
        for v in frontier:
            for e, direction in g.incident[v]:
                if e == exclude:
                    continue
                edges.add(e)
                trip = g.train[e]
                other = trip.tail if direction == Direction.FWD else trip.head
                if other not in seen:
                    seen.add(other)
                    nxt.add(other)
        frontier = nxt
        if not frontier:
            break
    return sorted(edges)


def init_edge_states(
    g: KnowledgeGraph,
    query: Triplet,
    k_hops: int,
    params: ContextBranchParams,
    exclude=AUTO_EXCLUDE,
) -> EdgeStateTable:
    """Initial states s_e^0 = rel_embed[relation(e)] over the neighborhood."""
    excluded = resolve_exclusion(g, query, exclude)
    edges = neighborhood_edges(g, query.head, query.tail, k_hops, excluded)
    rel_rows = params.rel_embed.data
    states = {e: rel_rows[g.train[e].relation].copy() for e in edges}
    return EdgeStateTable(graph=g, states=states, iteration=0, excluded=excluded)


def node_message(
    v: int, table: EdgeStateTable, g: KnowledgeGraph, exclude: int | None = None
) -> np.ndarray:
    """m_v = sum of incident in-neighborhood edge states; zero if none.

    The sum runs over incident-list entries, so a self-loop contributes
    its state twice.
    """
    g.check_entity(v)
    hidden = len(next(iter(table.states.values()))) if table.states else 0
    total = np.zeros(hidden)
    for e, _ in g.incident[v]:
        if e == exclude or e not in table.states:
            continue
        total = total + table.states[e]
    return total


def edge_update(
    e: int, d: int, table: EdgeStateTable, g: KnowledgeGraph, params: ContextBranchParams
) -> np.ndarray:
    """One update s_e^{d+1} = relu(concat(m_head, m_tail, s_e) @ w_d + b_d).

    A self-loop edge concatenates the same node message twice.
    """
    if e not in table.states:
        raise KeyError(f"edge {e} not in state table")
    if d >= len(params.w):
        raise ConfigError(f"iteration {d} exceeds configured sweeps {len(params.w)}")
    trip = g.train[e]
    m_head = node_message(trip.head, table, g)
    m_tail = node_message(trip.tail, table, g)
    x = np.concatenate([m_head, m_tail, table.states[e]])
    pre = x @ params.w[d].data + params.b[d].data
    return np.maximum(pre, 0.0)


def sweep(table: EdgeStateTable, g: KnowledgeGraph, params: ContextBranchParams) -> None:
    """Advance every edge one iteration synchronously (in place)."""
    d = table.iteration
    table.states = {e: edge_update(e, d, table, g, params) for e in table.states}
    table.iteration = d + 1


def _distinct_incident(g: KnowledgeGraph, v: int, table: EdgeStateTable) -> list[int]:
    present = {e for e, _ in g.incident[v] if e in table.states}
    return sorted(present)


def edge_attention(
    v: int, table: EdgeStateTable, store: EmbeddingStore, params: ContextBranchParams
) -> list[tuple[int, float]]:
    """Softmax over v's distinct incident edges of <s_e, attn_proj^T emb(v)>.

    Zero incident edges is the caller's no-context signal: the result is
    an empty list, and pooling falls back to a zero message.
    """
    g = table.graph
    edges = _distinct_incident(g, v, table)
    if not edges:
        return []
    query_vec = store.vector(v) @ params.attn_proj.data
    scores = np.array([table.states[e] @ query_vec for e in edges])
    shifted = np.exp(scores - scores.max())
    weights = shifted / shifted.sum()
    return list(zip(edges, weights.tolist()))


def attended_message(
    v: int, table: EdgeStateTable, store: EmbeddingStore, params: ContextBranchParams
) -> np.ndarray:
    """m_v^K = sum of attention-weighted final edge states; zero if no edges."""
    weighted = edge_attention(v, table, store, params)
    hidden = params.w_pair.data.shape[0] // 2
    total = np.zeros(hidden)
    for e, alpha in weighted:
        total = total + alpha * table.states[e]
    return total


def context_logits(rep: np.ndarray, params: ContextBranchParams) -> np.ndarray:
    """Project the pair representation to relation-logit space."""
    if rep.shape[0] != params.out_proj.data.shape[0]:
        raise ConfigError(
            f"rep length {rep.shape[0]} incompatible with out_proj rows "
            f"{params.out_proj.data.shape[0]}"
        )
    return rep @ params.out_proj.data + params.out_bias.data


@dataclass
class QueryStructure:
    """Static per-query index arrays driving the batched branch expression.

    Positions index into `edges` (edge axis) and `nodes` (node axis);
    entry arrays carry one element per (node, incident edge) pair so a
    self-loop is counted twice, matching `node_message`.
    """

    head: int
    tail: int
    excluded: int | None
    edges: np.ndarray  # (nE,) edge ids, ascending
    rel: np.ndarray  # (nE,) relation id per edge
    nodes: np.ndarray  # (nV,) node ids, ascending
    entry_edge_pos: np.ndarray  # (nEntries,) position into edges
    entry_node_pos: np.ndarray  # (nEntries,) position into nodes
    head_node_pos: np.ndarray  # (nE,) node position of each edge's head
    tail_node_pos: np.ndarray  # (nE,) node position of each edge's tail
    h_att_pos: np.ndarray  # positions into edges: distinct incident at head
    t_att_pos: np.ndarray  # positions into edges: distinct incident at tail


def structure_for_query(
    g: KnowledgeGraph, query: Triplet, k_hops: int, exclude=AUTO_EXCLUDE
) -> QueryStructure:
    """Precompute the neighborhood index arrays for one (h, t) query."""
    excluded = resolve_exclusion(g, query, exclude)
    edges = neighborhood_edges(g, query.head, query.tail, k_hops, excluded)
    edge_pos = {e: i for i, e in enumerate(edges)}
    node_set: set[int] = set()
    for e in edges:
        trip = g.train[e]
        node_set.add(trip.head)
        node_set.add(trip.tail)
    nodes = sorted(node_set)
    node_pos = {v: i for i, v in enumerate(nodes)}
    entry_edge: list[int] = []
    entry_node: list[int] = []
    for v in nodes:
        for e, _ in g.incident[v]:
            if e in edge_pos:
                entry_edge.append(edge_pos[e])
                entry_node.append(node_pos[v])
    rel = [g.train[e].relation for e in edges]
    head_node = [node_pos[g.train[e].head] for e in edges]
    tail_node = [node_pos[g.train[e].tail] for e in edges]
    h_att = [edge_pos[e] for e in _incident_distinct(g, query.head, edge_pos)]
    t_att = [edge_pos[e] for e in _incident_distinct(g, query.tail, edge_pos)]
    def as_int(xs: list[int]) -> np.ndarray:
        return np.asarray(xs, dtype=np.int64)

    return QueryStructure(
        head=query.head,
        tail=query.tail,
        excluded=excluded,
        edges=as_int(edges),
        rel=as_int(rel),
        nodes=as_int(nodes),
        entry_edge_pos=as_int(entry_edge),
        entry_node_pos=as_int(entry_node),
        head_node_pos=as_int(head_node),
        tail_node_pos=as_int(tail_node),
        h_att_pos=as_int(h_att),
        t_att_pos=as_int(t_att),
    )


def _incident_distinct(g: KnowledgeGraph, v: int, edge_pos: dict[int, int]) -> list[int]:
    return sorted({e for e, _ in g.incident[v] if e in edge_pos})


def _attended_expr(
    att_pos: np.ndarray, states: Tensor, emb: np.ndarray, params: ContextBranchParams
) -> Tensor:
    hidden = params.rel_embed.data.shape[1]
    if att_pos.size == 0:
        return constant(np.zeros(hidden))
    selected = states.gather_rows(att_pos)
    query_vec = Tensor(emb) @ params.attn_proj
    alpha = (selected @ query_vec).softmax()
    return alpha @ selected


def context_branch_expr(
    structure: QueryStructure,
    store: EmbeddingStore,
    params: ContextBranchParams,
    k_iters: int,
) -> tuple[Tensor, Tensor]:
    """Differentiable context branch: (pair representation, logits)."""
    if k_iters < 1:
        raise ConfigError(f"k_iters must be >= 1, got {k_iters}")
    if k_iters > len(params.w):
        raise ConfigError(
            f"k_iters {k_iters} exceeds configured sweep params {len(params.w)}"
        )
    hidden = params.rel_embed.data.shape[1]
    if structure.edges.size == 0:
        m_h = constant(np.zeros(hidden))
        m_t = constant(np.zeros(hidden))
    else:
        states = params.rel_embed.gather_rows(structure.rel)
        n_nodes = int(structure.nodes.size)
        for d in range(k_iters):
            entries = states.gather_rows(structure.entry_edge_pos)
            node_msgs = entries.scatter_sum(structure.entry_node_pos, n_nodes)
            m_head = node_msgs.gather_rows(structure.head_node_pos)
            m_tail = node_msgs.gather_rows(structure.tail_node_pos)
            x = concat([m_head, m_tail, states], axis=1)
            states = ((x @ params.w[d]) + params.b[d]).relu()
        m_h = _attended_expr(structure.h_att_pos, states, store.vector(structure.head), params)
        m_t = _attended_expr(structure.t_att_pos, states, store.vector(structure.tail), params)
    pair_in = concat([m_h, m_t])
    rep = ((pair_in @ params.w_pair) + params.b_pair).relu()
    logits = (rep @ params.out_proj) + params.out_bias
    return rep, logits


def pair_representation(
    query: Triplet,
    g: KnowledgeGraph,
    store: EmbeddingStore,
    params: ContextBranchParams,
    k_iters: int,
    k_hops: int = 2,
    exclude=AUTO_EXCLUDE,
) -> np.ndarray:
    """S_(h,t): init, K update sweeps, attention pooling, pair projection."""
    structure = structure_for_query(g, query, k_hops, exclude)
    with no_grad():
        rep, _ = context_branch_expr(structure, store, params, k_iters)
    return rep.data
