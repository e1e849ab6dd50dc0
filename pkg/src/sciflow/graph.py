"""Diagram graph data model: validation, canonical serialization, statistics.

Graphs are immutable after construction; every mutation path builds a new
value. Node ids are opaque strings and are never re-derived from labels,
so identities stay stable across verification edits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Any, Sequence

from .docio import canonical_bytes, load_document
from .errors import ConfigError, DocumentParseError, SchemaVersionError

GRAPH_SCHEMA_VERSION = "sciflow-graph/1"


class Provenance(enum.Enum):
    CANONICAL = "canonical"
    PREDICTED = "predicted"
    VERIFIED = "verified"


class NodeType(enum.Enum):
    MODULE = "module"
    DATA = "data"
    OPERATION = "operation"
    ANNOTATION = "annotation"
    UNKNOWN = "unknown"


class FlowDirection(enum.Enum):
    LEFT_RIGHT = "left_right"
    TOP_DOWN = "top_down"
    MIXED = "mixed"
    UNKNOWN = "unknown"


def _quantize_bbox(bbox: Sequence[float] | None) -> tuple[float, float, float, float] | None:
    if bbox is None:
        return None
    if len(bbox) != 4:
        raise ValueError(f"bbox must have 4 coordinates, got {len(bbox)}")
    # Quantized to the document precision so serialization round-trips exactly.
    return tuple(round(float(v), 6) for v in bbox)  # type: ignore[return-value]


@dataclass(frozen=True)
class Node:
    id: str
    label: str = ""
    node_type: NodeType = NodeType.UNKNOWN
    bbox: tuple[float, float, float, float] | None = None
    human_added: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "bbox", _quantize_bbox(self.bbox))


@dataclass(frozen=True)
class Edge:
    id: str
    source: str
    target: str
    directed: bool = True
    human_added: bool = False


@dataclass(frozen=True)
class Group:
    id: str
    label: str = ""
    members: tuple[str, ...] = ()
    parent: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(sorted(self.members)))


@dataclass(frozen=True)
class LayoutMeta:
    flow_direction: FlowDirection = FlowDirection.UNKNOWN
    figure_size: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.figure_size is not None:
            object.__setattr__(self, "figure_size", (int(self.figure_size[0]), int(self.figure_size[1])))


@dataclass(frozen=True)
class DiagramGraph:
    graph_id: str
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    groups: tuple[Group, ...] = ()
    layout: LayoutMeta | None = None
    provenance: Provenance = Provenance.CANONICAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=lambda e: e.id)))
        object.__setattr__(self, "groups", tuple(sorted(self.groups, key=lambda g: g.id)))

    def node_ids(self) -> set[str]:
        return {n.id for n in self.nodes}

    def edge_ids(self) -> set[str]:
        return {e.id for e in self.edges}

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    def with_layout(self, layout: LayoutMeta | None) -> "DiagramGraph":
        return replace(self, layout=layout)


@dataclass(frozen=True)
class Violation:
    code: str
    element_id: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    warnings: tuple[Violation, ...] = ()

    @property
    def is_valid(self) -> bool:
        return not self.violations


def validate_graph(g: DiagramGraph) -> ValidationReport:
    """Check every structural invariant; violations are data, not failures.

    Self-loops are reported as warnings: real figures occasionally contain
    them, so they do not invalidate a graph.
    """
    violations: list[Violation] = []
    warnings: list[Violation] = []

    seen_nodes: set[str] = set()
    for node in g.nodes:
        if node.id in seen_nodes:
            violations.append(Violation("duplicate_node_id", node.id, f"node id {node.id!r} declared more than once"))
        seen_nodes.add(node.id)
        if node.bbox is not None:
            x0, y0, x1, y1 = node.bbox
            if not (0.0 <= x0 <= x1 <= 1.0 and 0.0 <= y0 <= y1 <= 1.0):
                violations.append(Violation("bbox_out_of_range", node.id, f"bbox {node.bbox} outside normalized bounds"))

    node_ids = {n.id for n in g.nodes}
    seen_edges: set[str] = set()
    for edge in g.edges:
        if edge.id in seen_edges:
            violations.append(Violation("duplicate_edge_id", edge.id, f"edge id {edge.id!r} declared more than once"))
        seen_edges.add(edge.id)
        for endpoint in (edge.source, edge.target):
            if endpoint not in node_ids:
                violations.append(Violation("missing_endpoint", edge.id, f"edge {edge.id!r} references missing node {endpoint!r}"))
        if edge.source == edge.target:
            warnings.append(Violation("self_loop", edge.id, f"edge {edge.id!r} is a self-loop"))

    group_ids = {grp.id for grp in g.groups}
    seen_groups: set[str] = set()
    for grp in g.groups:
        if grp.id in seen_groups:
            violations.append(Violation("duplicate_group_id", grp.id, f"group id {grp.id!r} declared more than once"))
        seen_groups.add(grp.id)
        if not grp.members:
            violations.append(Violation("empty_group", grp.id, f"group {grp.id!r} has no members"))
        member_seen: set[str] = set()
        for member in grp.members:
            if member not in node_ids:
                violations.append(Violation("missing_member", grp.id, f"group {grp.id!r} references missing node {member!r}"))
            if member in member_seen:
                violations.append(Violation("duplicate_member", grp.id, f"group {grp.id!r} lists node {member!r} twice"))
            member_seen.add(member)
        if grp.parent is not None and grp.parent not in group_ids:
            violations.append(Violation("missing_parent", grp.id, f"group {grp.id!r} references missing parent {grp.parent!r}"))

    parents = {grp.id: grp.parent for grp in g.groups}
    for grp in g.groups:
        seen_chain = {grp.id}
        current = parents.get(grp.id)
        while current is not None:
            if current in seen_chain:
                violations.append(Violation("group_cycle", grp.id, f"group {grp.id!r} participates in a parent cycle"))
                break
            seen_chain.add(current)
            current = parents.get(current)

    return ValidationReport(tuple(violations), tuple(warnings))


# --- canonical document serialization -------------------------------------


def _node_doc(node: Node) -> dict[str, Any]:
    return {
        "id": node.id,
        "label": node.label,
        "node_type": node.node_type.value,
        "bbox": list(node.bbox) if node.bbox is not None else None,
        "human_added": node.human_added,
    }


def _edge_doc(edge: Edge) -> dict[str, Any]:
    return {
        "id": edge.id,
        "source": edge.source,
        "target": edge.target,
        "directed": edge.directed,
        "human_added": edge.human_added,
    }


def _group_doc(group: Group) -> dict[str, Any]:
    return {
        "id": group.id,
        "label": group.label,
        "members": list(group.members),
        "parent": group.parent,
    }


def graph_document(g: DiagramGraph) -> dict[str, Any]:
    """Graph as a document tree (nodes/edges/groups sorted ascending by id)."""
    layout = None
    if g.layout is not None:
        layout = {
            "flow_direction": g.layout.flow_direction.value,
            "figure_size": list(g.layout.figure_size) if g.layout.figure_size else None,
        }
    return {
        "schema_version": GRAPH_SCHEMA_VERSION,
        "graph_id": g.graph_id,
        "provenance": g.provenance.value,
        "nodes": [_node_doc(n) for n in g.nodes],
        "edges": [_edge_doc(e) for e in g.edges],
        "groups": [_group_doc(grp) for grp in g.groups],
        "layout": layout,
    }


def serialize_graph(g: DiagramGraph) -> bytes:
    return canonical_bytes(graph_document(g))


def _require(doc: dict[str, Any], key: str, location: str) -> Any:
    if key not in doc:
        raise DocumentParseError(f"missing key {key!r}", location=location)
    return doc[key]


def _parse_enum(kind: type, value: Any, location: str):
    try:
        return kind(value)
    except ValueError:
        raise DocumentParseError(f"invalid {kind.__name__} value {value!r}", location=location) from None


def parse_graph_document(data: bytes | str | dict[str, Any]) -> DiagramGraph:
    """Parse a canonical graph document; duplicate ids are parse errors."""
    doc = data if isinstance(data, dict) else load_document(data)
    version = _require(doc, "schema_version", "schema_version")
    if version != GRAPH_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"expected {GRAPH_SCHEMA_VERSION!r}, found {version!r}", location="schema_version"
        )

    nodes: list[Node] = []
    seen: set[str] = set()
    for i, nd in enumerate(_require(doc, "nodes", "nodes")):
        loc = f"nodes[{i}]"
        node_id = str(_require(nd, "id", loc))
        if node_id in seen:
            raise DocumentParseError(f"duplicate node id {node_id!r}", location=loc)
        seen.add(node_id)
        bbox = nd.get("bbox")
        nodes.append(
            Node(
                id=node_id,
                label=str(nd.get("label", "")),
                node_type=_parse_enum(NodeType, nd.get("node_type", "unknown"), loc),
                bbox=tuple(float(v) for v in bbox) if bbox is not None else None,
                human_added=bool(nd.get("human_added", False)),
            )
        )

    edges: list[Edge] = []
    seen_edges: set[str] = set()
    for i, ed in enumerate(_require(doc, "edges", "edges")):
        loc = f"edges[{i}]"
        edge_id = str(_require(ed, "id", loc))
        if edge_id in seen_edges:
            raise DocumentParseError(f"duplicate edge id {edge_id!r}", location=loc)
        seen_edges.add(edge_id)
        edges.append(
            Edge(
                id=edge_id,
                source=str(_require(ed, "source", loc)),
                target=str(_require(ed, "target", loc)),
                directed=bool(ed.get("directed", True)),
                human_added=bool(ed.get("human_added", False)),
            )
        )

    groups: list[Group] = []
    seen_groups: set[str] = set()
    for i, gd in enumerate(doc.get("groups", [])):
        loc = f"groups[{i}]"
        group_id = str(_require(gd, "id", loc))
        if group_id in seen_groups:
            raise DocumentParseError(f"duplicate group id {group_id!r}", location=loc)
        seen_groups.add(group_id)
        groups.append(
            Group(
                id=group_id,
                label=str(gd.get("label", "")),
                members=tuple(str(m) for m in gd.get("members", [])),
                parent=gd.get("parent"),
            )
        )

    layout = None
    layout_doc = doc.get("layout")
    if layout_doc is not None:
        size = layout_doc.get("figure_size")
        layout = LayoutMeta(
            flow_direction=_parse_enum(FlowDirection, layout_doc.get("flow_direction", "unknown"), "layout"),
            figure_size=(int(size[0]), int(size[1])) if size else None,
        )

    return DiagramGraph(
        graph_id=str(_require(doc, "graph_id", "graph_id")),
        nodes=tuple(nodes),
        edges=tuple(edges),
        groups=tuple(groups),
        layout=layout,
        provenance=_parse_enum(Provenance, _require(doc, "provenance", "provenance"), "provenance"),
    )


# --- statistics ------------------------------------------------------------


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    max_out_degree: int
    max_in_degree: int
    branching_density: float
    is_linear: bool
    group_depth: int


def _is_linear(g: DiagramGraph) -> bool:
    """True iff all degrees are <= 1 and the edges form at most one simple path."""
    out_deg: dict[str, int] = {}
    in_deg: dict[str, int] = {}
    succ: dict[str, str] = {}
    for e in g.edges:
        out_deg[e.source] = out_deg.get(e.source, 0) + 1
        in_deg[e.target] = in_deg.get(e.target, 0) + 1
        succ[e.source] = e.target
    if any(d > 1 for d in out_deg.values()) or any(d > 1 for d in in_deg.values()):
        return False
    if not g.edges:
        return True
    starts = [n for n in out_deg if n not in in_deg]
    if len(starts) != 1:
        return False  # several chains, or a pure cycle
    current = starts[0]
    visited_edges = 0
    seen = {current}
    while current in succ:
        current = succ[current]
        if current in seen:
            return False
        seen.add(current)
        visited_edges += 1
    return visited_edges == len(g.edges)


def _group_depth(g: DiagramGraph) -> int:
    parents = {grp.id: grp.parent for grp in g.groups}

    def depth(group_id: str, trail: set[str]) -> int:
        parent = parents.get(group_id)
        if parent is None or parent in trail or parent not in parents:
            return 1
        return 1 + depth(parent, trail | {group_id})

    return max((depth(grp.id, set()) for grp in g.groups), default=0)


def graph_stats(g: DiagramGraph) -> GraphStats:
    out_deg: dict[str, int] = {}
    in_deg: dict[str, int] = {}
    for e in g.edges:
        out_deg[e.source] = out_deg.get(e.source, 0) + 1
        in_deg[e.target] = in_deg.get(e.target, 0) + 1
    return GraphStats(
        node_count=len(g.nodes),
        edge_count=len(g.edges),
        max_out_degree=max(out_deg.values(), default=0),
        max_in_degree=max(in_deg.values(), default=0),
        branching_density=len(g.edges) / max(len(g.nodes), 1),
        is_linear=_is_linear(g),
        group_depth=_group_depth(g),
    )


class Difficulty(enum.Enum):
    EASY = "Easy"
    MEDIUM = "Medium"
    HARD = "Hard"


@dataclass(frozen=True)
class DifficultyConfig:
    """Binning thresholds; defaults are recorded in every report.

    Easy requires a small linear graph; Hard triggers on size or branching.
    """

    easy_max_nodes: int = 8
    hard_min_nodes: int = 18
    hard_branching: float = 1.5

    def __post_init__(self) -> None:
        if not (0 < self.easy_max_nodes < self.hard_min_nodes):
            raise ConfigError(
                f"node-count cut points must strictly increase: {self.easy_max_nodes} < {self.hard_min_nodes} required"
            )
        if self.hard_branching <= 0:
            raise ConfigError("branching cutoff must be positive")


def difficulty_level(stats: GraphStats, thresholds: DifficultyConfig = DifficultyConfig()) -> Difficulty:
    if stats.node_count <= thresholds.easy_max_nodes and stats.is_linear:
        return Difficulty.EASY
    if stats.node_count >= thresholds.hard_min_nodes or stats.branching_density >= thresholds.hard_branching:
        return Difficulty.HARD
    return Difficulty.MEDIUM
