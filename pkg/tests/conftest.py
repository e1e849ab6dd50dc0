"""Shared fixtures: generators, independent oracles, offline test doubles."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import numpy as np
import pytest

from sciflow.graph import DiagramGraph, Edge, Node, NodeType, Provenance
from sciflow.labels import filter_label
from sciflow.verify import Edit, EditKind, apply_edit

# Pairwise trigram-cosine below 0.1 raw (0.55 rescaled), so under the default
# 0.6 threshold equal labels match and distinct labels never do.
LABEL_POOL = [
    "Attention", "Backbone", "Pooling", "Sampler", "Gate", "Memory", "Router",
    "Planner", "Critic", "Head", "Buffer", "Mixer", "Scorer", "Parser", "Graph",
    "Vault", "Probe", "Lens", "Bridge", "Decoder",
]


class OneHotEmbedder:
    """Orthogonal basis vector per distinct text: cosine 1 iff texts equal."""

    def __init__(self):
        self.id = "onehot"
        self._index: dict[str, int] = {}

    def embed(self, texts):
        vectors = []
        for text in texts:
            if text not in self._index:
                self._index[text] = len(self._index)
        dim = max(len(self._index), 1)
        for text in texts:
            vec = np.zeros(dim, dtype=np.float64)
            vec[self._index[text]] = 1.0
            vectors.append(vec)
        return vectors


@pytest.fixture
def onehot():
    return OneHotEmbedder()


# --- random graphs -----------------------------------------------------------


def random_graph(
    rng: random.Random,
    graph_id: str = "g",
    max_nodes: int = 6,
    label_pool: list[str] | None = None,
    empty_label_rate: float = 0.0,
    p_edge: float = 0.3,
    self_loop_rate: float = 0.0,
    provenance: Provenance = Provenance.CANONICAL,
    min_nodes: int = 0,
) -> DiagramGraph:
    pool = label_pool if label_pool is not None else LABEL_POOL
    n = rng.randint(min_nodes, max_nodes)
    nodes = []
    for i in range(n):
        if empty_label_rate and rng.random() < empty_label_rate:
            label = ""
        else:
            label = rng.choice(pool)
        nodes.append(Node(id=f"{graph_id}n{i}", label=label, node_type=rng.choice(list(NodeType))))
    edges = []
    k = 0
    for i in range(n):
        for j in range(n):
            if i == j:
                if self_loop_rate and rng.random() < self_loop_rate:
                    edges.append(Edge(id=f"{graph_id}e{k}", source=nodes[i].id, target=nodes[j].id))
                    k += 1
                continue
            if rng.random() < p_edge:
                edges.append(Edge(id=f"{graph_id}e{k}", source=nodes[i].id, target=nodes[j].id))
                k += 1
    return DiagramGraph(graph_id=graph_id, nodes=tuple(nodes), edges=tuple(edges), provenance=provenance)


def random_matchable_graph(rng: random.Random, graph_id: str = "g", max_nodes: int = 10) -> DiagramGraph:
    """Every node carries a filter-surviving label, so the graph is perfectly
    self-similar under any well-formed embedder."""
    return random_graph(rng, graph_id, max_nodes=max_nodes, min_nodes=1, p_edge=0.25, self_loop_rate=0.05)


# --- brute-force linearity oracle ---------------------------------------------


def oracle_is_linear(g: DiagramGraph) -> bool:
    """Exhaustive path check: the edge list must spell out one simple path."""
    edge_list = [(e.source, e.target) for e in g.edges]
    if not edge_list:
        return True
    if len(edge_list) != len(set(edge_list)):
        return False
    incident = sorted({v for pair in edge_list for v in pair})
    for perm in itertools.permutations(incident):
        if set(zip(perm, perm[1:])) == set(edge_list) and len(perm) - 1 == len(edge_list):
            return True
    return False


# --- brute-force matching oracle ------------------------------------------------


def oracle_similarity(a: Node, b: Node) -> float:
    """Exact-label semantics mirroring node_similarity under an orthogonal
    embedder: equal surviving labels score 1, distinct ones 0.5."""
    la, lb = filter_label(a.label), filter_label(b.label)
    if la is not None and lb is not None:
        return 1.0 if la == lb else 0.5
    if a.node_type == b.node_type and a.node_type is not NodeType.UNKNOWN:
        return 1.0
    return 0.0


def _oracle_prf(num_p: int, den_p: int, num_r: int, den_r: int) -> tuple[float, float, float]:
    if den_p == 0 and den_r == 0:
        return 1.0, 1.0, 1.0
    if den_p == 0:
        return 0.0, 0.0, 0.0
    p = num_p / den_p
    r = 1.0 if den_r == 0 else num_r / den_r
    return p, r, (0.0 if p + r == 0 else 2 * p * r / (p + r))


@dataclass
class OracleMatch:
    pairs: set[tuple[str, str]]
    node_scores: tuple[float, float, float]
    edge_scores: tuple[float, float, float]
    verdicts: dict[str, tuple[str, tuple[str, ...] | None]]


def oracle_match(
    pred: DiagramGraph,
    ref: DiagramGraph,
    threshold: float = 0.6,
    allow_reachability: bool = True,
    max_path_len: int = 4,
) -> OracleMatch:
    pairs = {
        (p.id, r.id)
        for p in pred.nodes
        for r in ref.nodes
        if oracle_similarity(p, r) >= threshold
    }
    supported = {p for p, _ in pairs}
    recovered = {r for _, r in pairs}
    node_scores = _oracle_prf(len(supported), len(pred.nodes), len(recovered), len(ref.nodes))

    ref_edges = {(e.source, e.target) for e in ref.edges}
    ids = [n.id for n in ref.nodes]
    all_paths = []
    for k in range(3, max_path_len + 2):
        for seq in itertools.permutations(ids, k):
            if all((seq[i], seq[i + 1]) in ref_edges for i in range(k - 1)):
                all_paths.append(seq)

    match_of = {p.id: sorted(r for pp, r in pairs if pp == p.id) for p in pred.nodes}
    verdicts: dict[str, tuple[str, tuple[str, ...] | None]] = {}
    covered: set[tuple[str, str]] = set()
    for e in pred.edges:
        srcs = match_of.get(e.source, [])
        dsts = match_of.get(e.target, [])
        exact = sorted((a, b) for a in srcs for b in dsts if (a, b) in ref_edges)
        if exact:
            verdicts[e.id] = ("exact", exact[0])
            covered |= set(exact)
            continue
        if allow_reachability:
            candidates = [p for p in all_paths if p[0] in srcs and p[-1] in dsts]
            if candidates:
                witness = min(candidates, key=lambda p: (len(p), p))
                verdicts[e.id] = ("reachable", witness)
                covered |= set(zip(witness, witness[1:]))
                continue
        rev_exact = any((b, a) in ref_edges for a in srcs for b in dsts)
        rev_reach = allow_reachability and any(p[0] in dsts and p[-1] in srcs for p in all_paths)
        verdicts[e.id] = ("wrong_direction" if rev_exact or rev_reach else "unsupported", None)

    correct = sum(1 for kind, _ in verdicts.values() if kind in ("exact", "reachable"))
    edge_scores = _oracle_prf(correct, len(pred.edges), len(covered), len(ref.edges))
    return OracleMatch(pairs, node_scores, edge_scores, verdicts)


# --- verification oracle ------------------------------------------------------


def oracle_agreement_counts(auto: DiagramGraph, verified: DiagramGraph):
    """Independent identity-set counting for both element kinds."""

    def counts(auto_ids: set[str], kept) -> tuple[int, int, int]:
        retained = sum(1 for el in kept if not el.human_added)
        added = sum(1 for el in kept if el.human_added)
        removed = len(auto_ids) - retained
        return retained, removed, added

    return (
        counts({n.id for n in auto.nodes}, verified.nodes),
        counts({e.id for e in auto.edges}, verified.edges),
    )


# --- synthetic figure bundles ----------------------------------------------


def make_synthetic_bundle(root, idx: int, rng: random.Random):
    """Figure bundle (perception + arrow fixtures on disk) with its canonical
    graph: a column of labeled boxes plus one unlabeled box, chained by
    arrows. Canonical labeled nodes carry no type evidence so ablations
    degrade recall instead of being rescued by the type fallback."""
    import json

    k = rng.randint(2, 4)
    labels = rng.sample(LABEL_POOL, k)
    bundle_dir = root / f"bundle{idx}"
    bundle_dir.mkdir(parents=True)

    regions = []
    texts = []
    for i in range(k + 1):  # last box is the unlabeled diamond
        y0 = 0.05 + 0.18 * i
        shape = "rect" if i < k else "diamond"
        regions.append({"bbox": [0.1, y0, 0.4, y0 + 0.1], "shape_class": shape, "confidence": 0.9})
        if i < k:
            texts.append({"bbox": [0.15, y0 + 0.02, 0.35, y0 + 0.08], "text": labels[i], "confidence": 0.95})
    (bundle_dir / "perception.json").write_text(json.dumps({
        "schema_version": "sciflow-perception/1",
        "regions": regions,
        "texts": texts,
        "layout": {"flow_direction": "top_down", "figure_size": [800, 1000]},
    }))
    arrows = [[f"region:{i}", f"region:{i + 1}"] for i in range(k)]
    (bundle_dir / "arrows.json").write_text(json.dumps({"arrows": arrows, "flow": "TD"}))

    nodes = [Node(f"c{i}", labels[i], NodeType.UNKNOWN) for i in range(k)]
    nodes.append(Node(f"c{k}", "", NodeType.OPERATION))
    edges = [Edge(f"e{i}", f"c{i}", f"c{i + 1}") for i in range(k)]
    canonical = DiagramGraph(f"bundle{idx}", nodes=tuple(nodes), edges=tuple(edges))
    return bundle_dir, canonical


def random_edit_sequence(
    rng: random.Random, auto: DiagramGraph, max_edits: int = 8
) -> tuple[DiagramGraph, tuple[Edit, ...]]:
    """Random legal edit sequence applied over the automatic graph."""
    g = auto
    entries: list[Edit] = []
    fresh = itertools.count()
    for step in range(rng.randint(0, max_edits)):
        choices = ["add_node"]
        original_nodes = [n for n in g.nodes if not n.human_added]
        original_edges = [e for e in g.edges if not e.human_added]
        human = [n.id for n in g.nodes if n.human_added] + [e.id for e in g.edges if e.human_added]
        if original_nodes:
            choices.append("exclude_node")
        if original_edges:
            choices.append("exclude_edge")
        if len(g.nodes) >= 2:
            choices.append("add_edge")
        if human:
            choices.append("retract")
        kind = rng.choice(choices)
        edit_id = f"edit{step}"
        if kind == "exclude_node":
            edit = Edit(edit_id, EditKind.EXCLUDE_NODE, target_id=rng.choice(original_nodes).id)
        elif kind == "exclude_edge":
            edit = Edit(edit_id, EditKind.EXCLUDE_EDGE, target_id=rng.choice(original_edges).id)
        elif kind == "add_node":
            node = Node(id=f"human{next(fresh)}", label=rng.choice(LABEL_POOL), human_added=True)
            edit = Edit(edit_id, EditKind.ADD_NODE, node=node)
        elif kind == "add_edge":
            src, dst = rng.sample([n.id for n in g.nodes], 2)
            edge = Edge(id=f"humanedge{next(fresh)}", source=src, target=dst, human_added=True)
            edit = Edit(edit_id, EditKind.ADD_EDGE, edge=edge)
        else:
            edit = Edit(edit_id, EditKind.RETRACT, target_id=rng.choice(human))
        g, produced = apply_edit(g, edit)
        entries.extend(produced)
    return g, tuple(entries)
