"""Synthetic compositional knowledge graph for end-to-end benchmarks.

Construction: every entity gets a hidden type and an independent hidden
district bit. Base relations between a pair are a fixed function of the
two endpoint types; the dataset ships an embedding file whose vectors
carry a noisy one-hot of the type (never the district), so base labels
are recoverable from the embeddings. Every entity also has a train
self-loop, whose base relation is bijective in the type, so the type is
equally readable from the 1-hop relational context. Non-loop base edges
respect districts: an edge into an entity is only drawn from heads
whose type parity equals the tail's district bit.

Composite relations label 2-step base paths; their class depends on the
endpoint types plus the intermediate type's parity, which the district
invariant pins to the tail's district bit. Each evidence channel then
narrows a composite differently: endpoint embeddings alone leave two
candidates (the district bit is invisible to them), the two leg
relations leave the same two, and the 1-hop relational context of the
tail resolves it exactly (every in-edge carries the district parity,
and self-loops carry the endpoint types). The invariants that keep the
task well-posed:

  * every ordered pair carries at most one triplet across all splits,
    making the relation a function of the pair, and no two entities are
    connected in both directions;
  * every non-loop base edge (any split) has head type parity equal to
    the tail's district bit;
  * no base pair is connected by a forward 2-step train path (walks
    through self-loops do not count: they consume the pair's own edge,
    which evaluation excludes), and composite pairs are only chosen
    where all such paths agree on the class, so path evidence never
    contradicts the label.

A slice of entities is "rare": sampled with low weight, they end up with
few incident train edges (populating the limited-information bucket).

Run as a module to write a dataset directory:
    python3 -m kgfuse.synthetic --out data/synth --seed 42
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embeddings import write_embeddings

N_TYPES = 4

# Word pools keyed by entity type; descriptions draw mostly from their
# own type's pool so text correlates with the hidden type.
TYPE_WORDS = [
    ["crimson", "scarlet", "ruby", "ember", "garnet", "maroon"],
    ["azure", "cobalt", "sapphire", "cerulean", "indigo", "navy"],
    ["verdant", "emerald", "jade", "olive", "moss", "fern"],
    ["golden", "amber", "saffron", "ochre", "honey", "topaz"],
]
FILLER_WORDS = [
    "place", "figure", "object", "station", "concept", "artifact",
    "region", "subject", "entity", "locale", "item", "body",
]


@dataclass(frozen=True)
class SyntheticSpec:
    n_entities: int = 200
    rare_fraction: float = 0.2
    rare_weight: float = 0.05
    n_base: int = 3000
    n_comp: int = 1400
    holdout_fraction: float = 0.125  # each of valid and test
    embed_dim: int = 4  # exactly n_types: no spare noise dims to memorize
    embed_noise: float = 0.05
    seed: int = 42


def benchmark_config(**overrides) -> "TrainConfig":
    """Training configuration the benchmark numbers are quoted at.

    Small hidden/embedding sizes are deliberate: with spare capacity the
    branches memorize train examples through noise dimensions, and their
    confidently-wrong held-out logits drag the fused model below its
    strongest single branch.
    """
    from .model import TrainConfig

    settings = dict(
        hidden=16,
        prior_dim=4,
        k_iters=1,
        context_layers=1,
        max_path_len=2,
        learning_rate=5e-3,
        batch_size=32,
        epochs=50,
        seed=42,
    )
    settings.update(overrides)
    return TrainConfig(**settings)


def base_relation(type_h: int, type_t: int) -> int:
    return (type_h + 2 * type_t) % N_TYPES


def composite_relation(type_h: int, type_mid: int, type_t: int) -> int:
    """Composite class along a 2-path; only the middle type's parity acts.

    The two leg relations narrow the class to two candidates, endpoint
    types narrow it to the same two. Under the district invariant the
    middle parity equals the tail's district bit, so the tail's in-edge
    relations (all carrying that parity) resolve the class exactly.
    """
    return N_TYPES + (type_h + 2 * type_mid + 2 * type_t) % N_TYPES


@dataclass
class SyntheticDataset:
    entities: list[str]
    types: list[int]
    districts: list[int]
    relations: list[str]
    train: list[tuple[str, str, str]]
    valid: list[tuple[str, str, str]]
    test: list[tuple[str, str, str]]
    descriptions: dict[str, str]
    embeddings: dict[str, np.ndarray]
    rare: set[str]


def _entity_weights(spec: SyntheticSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n_rare = int(spec.n_entities * spec.rare_fraction)
    rare_mask = np.zeros(spec.n_entities, dtype=bool)
    rare_mask[rng.choice(spec.n_entities, size=n_rare, replace=False)] = True
    weights = np.where(rare_mask, spec.rare_weight, 1.0)
    return weights / weights.sum(), rare_mask


def _split(items: list, holdout: float, rng: np.random.Generator):
    order = rng.permutation(len(items))
    n_hold = int(len(items) * holdout)
    test_idx = set(order[:n_hold].tolist())
    valid_idx = set(order[n_hold : 2 * n_hold].tolist())
    train, valid, test = [], [], []
    for i, item in enumerate(items):
        if i in test_idx:
            test.append(item)
        elif i in valid_idx:
            valid.append(item)
        else:
            train.append(item)
    return train, valid, test


def _two_path_labels(
    train_base: list[tuple[int, int, int]], types: list[int]
) -> dict[tuple[int, int], set[int]]:
    """Composite classes implied by forward 2-paths over train base facts.

    The intermediate must differ from both endpoints: walks through a
    self-loop consume the pair's own edge, which query evaluation
    excludes, so they never count as path evidence.
    """
    out_edges: dict[int, list[tuple[int, int]]] = {}
    for h, r, t in train_base:
        out_edges.setdefault(h, []).append((r, t))
    labels: dict[tuple[int, int], set[int]] = {}
    for a, first_hops in sorted(out_edges.items()):
        for _, x in first_hops:
            if x == a:
                continue
            for _, b in out_edges.get(x, []):
                if a != b and x != b:
                    labels.setdefault((a, b), set()).add(
                        composite_relation(types[a], types[x], types[b])
                    )
    return labels


def _description(name: str, etype: int, rng: np.random.Generator) -> str:
    own = TYPE_WORDS[etype]
    words = [
        name,
        "is",
        "a",
        str(rng.choice(own)),
        str(rng.choice(FILLER_WORDS)),
        "with",
        str(rng.choice(own)),
        "and",
        str(rng.choice(own)),
        "traits",
    ]
    return " ".join(words)


def generate(spec: SyntheticSpec) -> SyntheticDataset:
    """Build the dataset; deterministic for a given SyntheticSpec."""
    rng = np.random.default_rng(spec.seed)
    names = [f"e{i:03d}" for i in range(spec.n_entities)]
    types = rng.integers(N_TYPES, size=spec.n_entities).tolist()
    districts = rng.integers(2, size=spec.n_entities).tolist()
    probs, rare_mask = _entity_weights(spec, rng)
    relations = [f"base_{i}" for i in range(N_TYPES)] + [
        f"comp_{i}" for i in range(N_TYPES)
    ]

    used_pairs: set[tuple[int, int]] = set()
    base: list[tuple[int, int, int]] = []  # (head, rel, tail) as indices
    attempts = 0
    while len(base) < spec.n_base and attempts < spec.n_base * 50:
        attempts += 1
        h, t = rng.choice(spec.n_entities, size=2, replace=False, p=probs)
        h, t = int(h), int(t)
        # District invariant: in-edges only from heads whose type parity
        # matches the tail's district bit.
        if types[h] % 2 != districts[t]:
            continue
        # No mutual pairs: a 2-cycle would give the train query on a
        # self-loop misleading forward-path evidence.
        if (h, t) in used_pairs or (t, h) in used_pairs:
            continue
        used_pairs.add((h, t))
        base.append((h, base_relation(types[h], types[t]), t))

    base_train, base_valid, base_test = _split(base, spec.holdout_fraction, rng)

    # An entity whose train out-degree is zero only reveals its type up
    # to a +2 shift, leaving some base labels ambiguous. Give every
    # entity an outgoing train edge.
    def add_out_edge(v: int, clean: bool) -> bool:
        draws = list(rng.choice(spec.n_entities, size=200, p=probs)) + list(
            range(spec.n_entities)
        )
        for t in map(int, draws):
            if t == v or types[v] % 2 != districts[t]:
                continue
            if (v, t) in used_pairs or (t, v) in used_pairs:
                continue
            if clean and not _addition_is_clean(v, t):
                continue
            used_pairs.add((v, t))
            base_train.append((v, base_relation(types[v], types[t]), t))
            return True
        return False

    def _addition_is_clean(v: int, t: int) -> bool:
        # Purity: the new edge must not put a forward 2-path over any
        # base pair, and its own pair must not already have one.
        if (v, t) in _two_path_labels(base_train, types):
            return False
        base_pairs = {(h, b) for split in (base_train, base_valid, base_test) for h, _, b in split}
        created = {(u, t) for u, _, mid in base_train if mid == v and u != t}
        created |= {(v, w) for mid, _, w in base_train if mid == t and w != v}
        return not (created & base_pairs)

    for v in range(spec.n_entities):
        if not any(h == v for h, _, _ in base_train):
            add_out_edge(v, clean=False)

    # Purity sweep: drop base facts whose pair is covered by a forward
    # 2-path, so path presence cleanly separates composite from base.
    while True:
        covered = set(_two_path_labels(base_train, types))
        keep = [f for f in base_train if (f[0], f[2]) not in covered]
        if len(keep) == len(base_train):
            break
        used_pairs -= {(f[0], f[2]) for f in base_train if (f[0], f[2]) in covered}
        base_train = keep
    for split in (base_valid, base_test):
        dropped = [f for f in split if (f[0], f[2]) in covered]
        for f in dropped:
            split.remove(f)
            used_pairs.discard((f[0], f[2]))

    # Re-fix out-degrees stranded by the sweep, now purity-aware.
    has_out = {h for h, _, _ in base_train}
    for v in range(spec.n_entities):
        if v not in has_out:
            add_out_edge(v, clean=True)

    # A train self-loop on every entity: the base rule on a self-pair
    # is (3 * type) mod 4, bijective in the type, so the loop relation
    # broadcasts the full type into the 1-hop relational context.
    for v in range(spec.n_entities):
        used_pairs.add((v, v))
        base_train.append((v, base_relation(types[v], types[v]), v))

    # Composites label 2-paths whose both legs are train base facts, so
    # the path evidence survives into every split's queries. Pairs whose
    # 2-paths disagree on the class are skipped: the label must be a
    # function of the observable graph.
    labels = _two_path_labels(base_train, types)
    candidates = [
        (a, rels.pop(), b)
        for (a, b), rels in sorted(labels.items())
        if len(rels) == 1
    ]
    comp: list[tuple[int, int, int]] = []
    # Selection re-checks pair freedom: two candidates reverse to each
    # other, and taking one must block the other.
    for i in rng.permutation(len(candidates)):
        a, r, b = candidates[i]
        if (a, b) in used_pairs or (b, a) in used_pairs:
            continue
        used_pairs.add((a, b))
        comp.append((a, r, b))
        if len(comp) == spec.n_comp:
            break

    comp_train, comp_valid, comp_test = _split(comp, spec.holdout_fraction, rng)

    train = base_train + comp_train
    valid = base_valid + comp_valid
    test = base_test + comp_test

    # Entities appearing only in held-out splits would face the engine
    # with no context at all; fold those triplets back into train.
    covered_ents = {v for h, _, t in train for v in (h, t)}
    for split in (valid, test):
        moved = [q for q in split if q[0] not in covered_ents or q[2] not in covered_ents]
        for q in moved:
            split.remove(q)
            train.append(q)
            covered_ents.update((q[0], q[2]))

    rng.shuffle(train)

    def to_names(triples):
        return [(names[h], relations[r], names[t]) for h, r, t in triples]

    emb_rng = np.random.default_rng(spec.seed + 1)
    embeddings = {}
    for name, etype in zip(names, types):
        vec = emb_rng.normal(0.0, spec.embed_noise, size=spec.embed_dim)
        vec[etype] += 1.0
        embeddings[name] = vec.astype(np.float32)

    descriptions = {
        name: _description(name, types[i], rng) for i, name in enumerate(names)
    }
    return SyntheticDataset(
        entities=names,
        types=types,
        districts=districts,
        relations=relations,
        train=to_names(train),
        valid=to_names(valid),
        test=to_names(test),
        descriptions=descriptions,
        embeddings=embeddings,
        rare={names[i] for i in np.nonzero(rare_mask)[0]},
    )


def write_dataset(data: SyntheticDataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split_name in ("train", "valid", "test"):
        with open(out / f"{split_name}.txt", "w", encoding="utf-8") as fh:
            for h, r, t in getattr(data, split_name):
                fh.write(f"{h}\t{r}\t{t}\n")
    with open(out / "descriptions.tsv", "w", encoding="utf-8") as fh:
        for name in data.entities:
            fh.write(f"{name}\t{data.descriptions[name]}\n")
    dim = len(next(iter(data.embeddings.values())))
    entries = [(name, data.embeddings[name]) for name in data.entities]
    write_embeddings(out / "embeddings.museemb", entries, dim)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate the synthetic benchmark KG")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--entities", type=int, default=200)
    parser.add_argument("--base", type=int, default=3000)
    parser.add_argument("--comp", type=int, default=1400)
    args = parser.parse_args(argv)
    spec = SyntheticSpec(
        n_entities=args.entities, n_base=args.base, n_comp=args.comp, seed=args.seed
    )
    data = generate(spec)
    write_dataset(data, args.out)
    print(
        f"wrote {args.out}: {len(data.train)} train, {len(data.valid)} valid, "
        f"{len(data.test)} test, {len(data.entities)} entities, "
        f"{len(data.relations)} relations"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
