"""Semantic node matching and path-aware directed edge matching.

Matching is asymmetric by construction: several predicted nodes may support
one reference node (over-segmentation tolerance) and one predicted node may
support several reference nodes. Edge correctness follows the canonical
topology: a predicted edge is correct when its matched endpoints are joined
by a direct canonical edge, or (with reachability enabled) by a directed
canonical path that skips intermediate steps.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ConfigError, ContractViolation
from .graph import DiagramGraph, Node, NodeType
from .labels import filter_label
from .providers import EmbeddingProvider, cosine

DEFAULT_NODE_THRESHOLD = 0.60
DEFAULT_MAX_PATH_LEN = 4


@dataclass(frozen=True)
class MatchPair:
    pred_id: str
    ref_id: str
    similarity: float


@dataclass(frozen=True)
class NodeMatching:
    pairs: tuple[MatchPair, ...]
    recovered_ref: frozenset[str]
    supported_pred: frozenset[str]
    threshold_used: float


class Verdict(enum.Enum):
    EXACT = "exact"
    REACHABLE = "reachable"
    WRONG_DIRECTION = "wrong_direction"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class EdgeVerdict:
    pred_edge_id: str
    verdict: Verdict
    witness_path: tuple[str, ...] | None = None

    @property
    def is_correct(self) -> bool:
        return self.verdict in (Verdict.EXACT, Verdict.REACHABLE)


@dataclass(frozen=True)
class MatchResult:
    node_precision: float
    node_recall: float
    node_f1: float
    edge_precision: float
    edge_recall: float
    edge_f1: float
    graph_score: float
    matching: NodeMatching
    edge_verdicts: tuple[EdgeVerdict, ...]


def node_similarity(a: Node, b: Node, embedder: EmbeddingProvider) -> float:
    """Rescaled label-embedding cosine in [0,1]; coarse type fallback when
    either label filters away."""
    label_a = filter_label(a.label)
    label_b = filter_label(b.label)
    if label_a is not None and label_b is not None:
        vec_a, vec_b = embedder.embed([label_a, label_b])
        return _rescale(cosine(vec_a, vec_b))
    if a.node_type == b.node_type and a.node_type is not NodeType.UNKNOWN:
        return 1.0
    return 0.0


def _rescale(cos: float) -> float:
    return min(1.0, max(0.0, (cos + 1.0) / 2.0))


def match_nodes(
    pred: DiagramGraph,
    ref: DiagramGraph,
    embedder: EmbeddingProvider,
    threshold: float = DEFAULT_NODE_THRESHOLD,
) -> NodeMatching:
    """Record every (pred, ref) pair with similarity at or above threshold."""
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"node threshold must lie in (0,1], got {threshold}")

    # Embed each distinct surviving label once per call.
    labels = sorted(
        {lab for n in (*pred.nodes, *ref.nodes) if (lab := filter_label(n.label)) is not None}
    )
    vectors = dict(zip(labels, embedder.embed(labels))) if labels else {}

    def similarity(a: Node, b: Node) -> float:
        la, lb = filter_label(a.label), filter_label(b.label)
        if la is not None and lb is not None:
            return _rescale(cosine(vectors[la], vectors[lb]))
        if a.node_type == b.node_type and a.node_type is not NodeType.UNKNOWN:
            return 1.0
        return 0.0

    pairs = []
    for p in pred.nodes:
        for r in ref.nodes:
            sim = similarity(p, r)
            if sim >= threshold:
                pairs.append(MatchPair(p.id, r.id, sim))
    pairs.sort(key=lambda pair: (pair.pred_id, pair.ref_id))
    return NodeMatching(
        pairs=tuple(pairs),
        recovered_ref=frozenset(pair.ref_id for pair in pairs),
        supported_pred=frozenset(pair.pred_id for pair in pairs),
        threshold_used=threshold,
    )


def _prf(numerator_p: int, denom_p: int, numerator_r: int, denom_r: int) -> tuple[float, float, float]:
    """Shared degenerate conventions: both sides empty scores perfect, an
    empty prediction against a nonempty reference scores zero, and an empty
    reference makes recall vacuously 1."""
    if denom_p == 0 and denom_r == 0:
        return 1.0, 1.0, 1.0
    if denom_p == 0:
        return 0.0, 0.0, 0.0
    precision = numerator_p / denom_p
    recall = 1.0 if denom_r == 0 else numerator_r / denom_r
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def score_nodes(m: NodeMatching, pred: DiagramGraph, ref: DiagramGraph) -> tuple[float, float, float]:
    return _prf(len(m.supported_pred), len(pred.nodes), len(m.recovered_ref), len(ref.nodes))


def _pred_to_refs(m: NodeMatching) -> dict[str, list[str]]:
    mapping: dict[str, list[str]] = {}
    for pair in m.pairs:
        mapping.setdefault(pair.pred_id, []).append(pair.ref_id)
    for refs in mapping.values():
        refs.sort()
    return mapping


def _simple_paths(ref: DiagramGraph, source: str, max_len: int) -> dict[str, tuple[str, ...]]:
    """Minimal simple path (by length, then node sequence) from source to
    every node reachable in 2..max_len edges."""
    succ: dict[str, list[str]] = {}
    for e in ref.edges:
        succ.setdefault(e.source, []).append(e.target)
    for targets in succ.values():
        targets.sort()

    best: dict[str, tuple[str, ...]] = {}

    def walk(path: list[str]) -> None:
        current = path[-1]
        if len(path) - 1 >= 2:
            candidate = tuple(path)
            prior = best.get(current)
            if prior is None or (len(candidate), candidate) < (len(prior), prior):
                best[current] = candidate
        if len(path) - 1 >= max_len:
            return
        for nxt in succ.get(current, []):
            if nxt not in path:
                path.append(nxt)
                walk(path)
                path.pop()

    walk([source])
    return best


def match_edges(
    pred: DiagramGraph,
    ref: DiagramGraph,
    m: NodeMatching,
    allow_reachability: bool = True,
    max_path_len: int = DEFAULT_MAX_PATH_LEN,
) -> list[EdgeVerdict]:
    """Classify every predicted edge as exact, reachable, wrong_direction or
    unsupported.

    Witness selection is a pure function of the inputs: among all matched
    endpoint pairs, the minimal (length, node sequence) canonical path wins,
    so results do not depend on iteration order.
    """
    ref_edge_set = {(e.source, e.target) for e in ref.edges}
    mapping = _pred_to_refs(m)
    path_cache: dict[str, dict[str, tuple[str, ...]]] = {}

    def paths_from(source: str) -> dict[str, tuple[str, ...]]:
        if source not in path_cache:
            path_cache[source] = _simple_paths(ref, source, max_path_len)
        return path_cache[source]

    verdicts = []
    for edge in pred.edges:
        sources = mapping.get(edge.source, [])
        targets = mapping.get(edge.target, [])

        exact_pairs = sorted((a, b) for a in sources for b in targets if (a, b) in ref_edge_set)
        if exact_pairs:
            verdicts.append(EdgeVerdict(edge.id, Verdict.EXACT, exact_pairs[0]))
            continue

        if allow_reachability:
            witness: tuple[str, ...] | None = None
            for a in sources:
                reachable = paths_from(a)
                for b in targets:
                    candidate = reachable.get(b)
                    if candidate is not None and (witness is None or (len(candidate), candidate) < (len(witness), witness)):
                        witness = candidate
            if witness is not None:
                verdicts.append(EdgeVerdict(edge.id, Verdict.REACHABLE, witness))
                continue

        reversed_exact = any((b, a) in ref_edge_set for a in sources for b in targets)
        reversed_reachable = allow_reachability and any(
            a in paths_from(b) for a in sources for b in targets
        )
        if reversed_exact or reversed_reachable:
            verdicts.append(EdgeVerdict(edge.id, Verdict.WRONG_DIRECTION))
        else:
            verdicts.append(EdgeVerdict(edge.id, Verdict.UNSUPPORTED))
    return verdicts


def _covered_ref_edges(
    verdicts: list[EdgeVerdict] | tuple[EdgeVerdict, ...],
    pred: DiagramGraph,
    ref: DiagramGraph,
    m: NodeMatching,
) -> set[tuple[str, str]]:
    """Reference edges lying on a correct predicted edge's exact relation or
    witness path."""
    ref_edge_set = {(e.source, e.target) for e in ref.edges}
    mapping = _pred_to_refs(m)
    pred_edges = {e.id: e for e in pred.edges}
    covered: set[tuple[str, str]] = set()
    for verdict in verdicts:
        if verdict.verdict is Verdict.EXACT:
            edge = pred_edges[verdict.pred_edge_id]
            for a in mapping.get(edge.source, []):
                for b in mapping.get(edge.target, []):
                    if (a, b) in ref_edge_set:
                        covered.add((a, b))
        elif verdict.verdict is Verdict.REACHABLE and verdict.witness_path:
            path = verdict.witness_path
            for i in range(len(path) - 1):
                step = (path[i], path[i + 1])
                if step in ref_edge_set:
                    covered.add(step)
    return covered


def score_edges(
    verdicts: list[EdgeVerdict] | tuple[EdgeVerdict, ...],
    pred: DiagramGraph,
    ref: DiagramGraph,
    m: NodeMatching,
) -> tuple[float, float, float]:
    correct = sum(1 for v in verdicts if v.is_correct)
    covered = _covered_ref_edges(verdicts, pred, ref, m)
    return _prf(correct, len(pred.edges), len(covered), len(ref.edges))


def graph_score(node_f1: float, edge_f1: float, node_weight: float = 0.4, edge_weight: float = 0.6) -> float:
    """Weighted graph-level score; relational accuracy carries the larger share."""
    for name, value in (("node_f1", node_f1), ("edge_f1", edge_f1)):
        if not 0.0 <= value <= 1.0:
            raise ContractViolation(f"{name} must lie in [0,1], got {value}")
    return node_weight * node_f1 + edge_weight * edge_f1


def match_graphs(
    pred: DiagramGraph,
    ref: DiagramGraph,
    embedder: EmbeddingProvider,
    threshold: float = DEFAULT_NODE_THRESHOLD,
    allow_reachability: bool = True,
    max_path_len: int = DEFAULT_MAX_PATH_LEN,
    node_weight: float = 0.4,
    edge_weight: float = 0.6,
) -> MatchResult:
    matching = match_nodes(pred, ref, embedder, threshold)
    node_p, node_r, node_f1 = score_nodes(matching, pred, ref)
    verdicts = match_edges(pred, ref, matching, allow_reachability, max_path_len)
    edge_p, edge_r, edge_f1 = score_edges(verdicts, pred, ref, matching)
    return MatchResult(
        node_precision=node_p,
        node_recall=node_r,
        node_f1=node_f1,
        edge_precision=edge_p,
        edge_recall=edge_r,
        edge_f1=edge_f1,
        graph_score=graph_score(node_f1, edge_f1, node_weight, edge_weight),
        matching=matching,
        edge_verdicts=tuple(verdicts),
    )
