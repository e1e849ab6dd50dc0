"""Flowchart-subset intermediate representation: parsing, emission, grounding.

The accepted grammar is frozen: `flowchart TD|LR` header, node declarations
`id[label]` / `id(label)` / `id{label}`, bare-id implicit declarations,
`-->` and `-.->` edges, one level of `subgraph <label> ... end`, and `%%`
comment lines. Anything else is a hard error, never a silent skip: the
topology contract is what-you-see-is-what-you-write, so dropping constructs
would corrupt topology.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ConfigError, SciflowError
from .graph import DiagramGraph, Edge, Group, Node, NodeType, Provenance
from .providers import EmbeddingProvider, cosine


class ShapeHint(enum.Enum):
    RECT = "rect"
    ROUNDED = "rounded"
    DIAMOND = "diamond"
    NONE = "none"


class EdgeStyle(enum.Enum):
    SOLID = "solid"
    DASHED = "dashed"


# Drawn shapes carry coarse type semantics; the mapping is configurable.
DEFAULT_SHAPE_TYPES: Mapping[ShapeHint, NodeType] = {
    ShapeHint.RECT: NodeType.MODULE,
    ShapeHint.ROUNDED: NodeType.DATA,
    ShapeHint.DIAMOND: NodeType.OPERATION,
    ShapeHint.NONE: NodeType.UNKNOWN,
}


@dataclass(frozen=True)
class IrNode:
    abstract_id: str
    label: str
    shape: ShapeHint = ShapeHint.NONE


@dataclass(frozen=True)
class IrEdge:
    src: str
    dst: str
    style: EdgeStyle = EdgeStyle.SOLID


@dataclass(frozen=True)
class IrSubgraph:
    label: str
    members: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(sorted(self.members)))


@dataclass(frozen=True)
class IrGraph:
    """Canonicalized on construction: nodes by id, edges by endpoints,
    subgraphs by label, so parse/emit round-trips compare with plain ==."""

    ir_nodes: tuple[IrNode, ...] = ()
    ir_edges: tuple[IrEdge, ...] = ()
    ir_subgraphs: tuple[IrSubgraph, ...] = ()
    flow: str = "TD"

    def __post_init__(self) -> None:
        object.__setattr__(self, "ir_nodes", tuple(sorted(self.ir_nodes, key=lambda n: n.abstract_id)))
        object.__setattr__(
            self, "ir_edges", tuple(sorted(self.ir_edges, key=lambda e: (e.src, e.dst, e.style.value)))
        )
        object.__setattr__(
            self, "ir_subgraphs", tuple(sorted(self.ir_subgraphs, key=lambda s: (s.label, s.members)))
        )


class MermaidParseError(SciflowError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        self.diagnostic = f"{line}:{col}: {message}"
        super().__init__(self.diagnostic)


class UnsupportedConstructError(MermaidParseError):
    def __init__(self, construct: str, line: int, col: int):
        super().__init__(f"unsupported construct: {construct}", line, col)


_ID = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_HEADER = re.compile(r"^flowchart[ \t]+(TD|LR)[ \t]*$")
_SHAPE_BRACKETS = {"[": ("]", ShapeHint.RECT), "(": (")", ShapeHint.ROUNDED), "{": ("}", ShapeHint.DIAMOND)}

# Mermaid constructs outside the subset, recognized so we can name them.
_FOREIGN_KEYWORDS = {
    "graph", "classDef", "class", "style", "linkStyle", "click", "direction",
    "accTitle", "accDescr", "sequenceDiagram", "classDiagram", "stateDiagram",
}


def _find_arrows(line: str, line_no: int) -> list[tuple[int, int, EdgeStyle]]:
    """Arrow spans outside any label bracket; foreign arrows are hard errors."""
    arrows: list[tuple[int, int, EdgeStyle]] = []
    closer: str | None = None
    i = 0
    while i < len(line):
        ch = line[i]
        if closer is not None:
            if ch == closer:
                closer = None
            i += 1
            continue
        if ch in _SHAPE_BRACKETS:
            closer = _SHAPE_BRACKETS[ch][0]
            i += 1
            continue
        if ch in "-=~<":
            if line.startswith("-.->", i):
                arrows.append((i, i + 4, EdgeStyle.DASHED))
                i += 4
                continue
            if line.startswith("-->", i) and not line.startswith("-->>", i):
                arrows.append((i, i + 3, EdgeStyle.SOLID))
                i += 3
                continue
            run_end = i
            while run_end < len(line) and line[run_end] in "-=~<>.xo":
                run_end += 1
            raise UnsupportedConstructError(f"arrow {line[i:run_end]!r}", line_no, i + 1)
        i += 1
    return arrows


@dataclass
class _NodeRef:
    abstract_id: str
    label: str | None
    shape: ShapeHint
    explicit: bool


def _parse_ref(segment: str, line_no: int, col_offset: int) -> _NodeRef:
    stripped = segment.strip()
    pad = col_offset + (len(segment) - len(segment.lstrip()))
    if not stripped:
        raise MermaidParseError("expected a node reference", line_no, pad + 1)
    match = _ID.match(stripped)
    if not match:
        raise MermaidParseError(f"invalid node id at {stripped.split()[0]!r}", line_no, pad + 1)
    ident = match.group(0)
    rest = stripped[len(ident):].strip()
    if not rest:
        return _NodeRef(ident, None, ShapeHint.NONE, explicit=False)
    opener = rest[0]
    if opener not in _SHAPE_BRACKETS:
        raise MermaidParseError(f"unexpected {opener!r} after node id {ident!r}", line_no, pad + len(ident) + 1)
    close, shape = _SHAPE_BRACKETS[opener]
    end = rest.find(close, 1)
    if end == -1:
        raise MermaidParseError(f"unterminated {opener!r} label for node {ident!r}", line_no, pad + len(ident) + 1)
    trailing = rest[end + 1:].strip()
    if trailing:
        raise MermaidParseError(f"unexpected text {trailing!r} after node declaration", line_no, pad + 1)
    return _NodeRef(ident, rest[1:end].strip(), shape, explicit=True)


def parse_mermaid(text: str) -> IrGraph:
    """Parse the frozen flowchart subset; diagnostics carry line:col."""
    nodes: dict[str, IrNode] = {}
    explicit: set[str] = set()
    edges: list[IrEdge] = []
    subgraphs: list[tuple[str, list[str]]] = []
    current_subgraph: list[str] | None = None
    flow: str | None = None

    def declare(ref: _NodeRef, line_no: int, col: int) -> None:
        existing = nodes.get(ref.abstract_id)
        if existing is None:
            label = (ref.label or "") if ref.explicit else ref.abstract_id
            nodes[ref.abstract_id] = IrNode(ref.abstract_id, label, ref.shape)
            if ref.explicit:
                explicit.add(ref.abstract_id)
            if current_subgraph is not None:
                current_subgraph.append(ref.abstract_id)
            return
        if ref.explicit:
            if ref.abstract_id in explicit:
                raise MermaidParseError(f"duplicate node id {ref.abstract_id!r}", line_no, col)
            # implicit reference upgraded by a later explicit declaration
            nodes[ref.abstract_id] = IrNode(ref.abstract_id, ref.label or "", ref.shape)
            explicit.add(ref.abstract_id)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        indent = len(raw) - len(raw.lstrip())
        if not line or line.startswith("%%"):
            continue

        if flow is None:
            header = _HEADER.match(line)
            if header:
                flow = header.group(1)
                continue
            first = line.split()[0]
            if first in _FOREIGN_KEYWORDS or first == "flowchart":
                raise UnsupportedConstructError(f"header {line!r}", line_no, indent + 1)
            raise MermaidParseError("expected 'flowchart TD' or 'flowchart LR' header", line_no, indent + 1)

        first_word = line.split()[0]
        if first_word in _FOREIGN_KEYWORDS:
            raise UnsupportedConstructError(first_word, line_no, indent + 1)

        if first_word == "subgraph":
            if current_subgraph is not None:
                raise UnsupportedConstructError("nested subgraph", line_no, indent + 1)
            label = line[len("subgraph"):].strip()
            if not label:
                raise MermaidParseError("subgraph requires a label", line_no, indent + 1)
            current_subgraph = []
            subgraphs.append((label, current_subgraph))
            continue

        if line == "end":
            if current_subgraph is None:
                raise MermaidParseError("'end' without an open subgraph", line_no, indent + 1)
            current_subgraph = None
            continue

        arrows = _find_arrows(raw, line_no)
        if len(arrows) > 1:
            raise UnsupportedConstructError("edge chaining", line_no, arrows[1][0] + 1)
        if len(arrows) == 1:
            start, stop, style = arrows[0]
            src = _parse_ref(raw[:start], line_no, 0)
            dst = _parse_ref(raw[stop:], line_no, stop)
            declare(src, line_no, indent + 1)
            declare(dst, line_no, stop + 1)
            edges.append(IrEdge(src.abstract_id, dst.abstract_id, style))
            continue

        ref = _parse_ref(raw, line_no, 0)
        declare(ref, line_no, indent + 1)

    if flow is None:
        raise MermaidParseError("empty document: missing flowchart header", 1, 1)
    if current_subgraph is not None:
        raise MermaidParseError("unterminated subgraph: missing 'end'", len(text.splitlines()) + 1, 1)

    return IrGraph(
        ir_nodes=tuple(nodes.values()),
        ir_edges=tuple(edges),
        ir_subgraphs=tuple(IrSubgraph(label, tuple(members)) for label, members in subgraphs),
        flow=flow,
    )


_SHAPE_DELIMS = {ShapeHint.RECT: ("[", "]"), ShapeHint.ROUNDED: ("(", ")"), ShapeHint.DIAMOND: ("{", "}")}


def _declaration(node: IrNode) -> str:
    if node.shape is ShapeHint.NONE:
        if node.label != node.abstract_id:
            raise ValueError(f"shape-less node {node.abstract_id!r} must carry its id as label")
        return node.abstract_id
    opener, closer = _SHAPE_DELIMS[node.shape]
    if closer in node.label or "\n" in node.label:
        raise ValueError(f"label for {node.abstract_id!r} cannot contain {closer!r} or newlines")
    if node.label != node.label.strip():
        raise ValueError(f"label for {node.abstract_id!r} must be trimmed")
    return f"{node.abstract_id}{opener}{node.label}{closer}"


def emit_mermaid(ir: IrGraph) -> str:
    """Deterministic emitter for the same subset; parse(emit(ir)) == ir."""
    lines = [f"flowchart {ir.flow}"]
    in_subgraph: set[str] = set()
    by_id = {n.abstract_id: n for n in ir.ir_nodes}
    for sub in ir.ir_subgraphs:
        lines.append(f"subgraph {sub.label}")
        for member in sub.members:
            lines.append(f"  {_declaration(by_id[member])}")
            in_subgraph.add(member)
        lines.append("end")
    for node in ir.ir_nodes:
        if node.abstract_id not in in_subgraph:
            lines.append(_declaration(node))
    for edge in ir.ir_edges:
        arrow = "-->" if edge.style is EdgeStyle.SOLID else "-.->"
        lines.append(f"{edge.src} {arrow} {edge.dst}")
    return "\n".join(lines) + "\n"


# --- grounding ---------------------------------------------------------------


@dataclass(frozen=True)
class GroundedNode:
    """Consolidated perception output consumed during grounding."""

    node_id: str
    label: str
    node_type: NodeType = NodeType.UNKNOWN
    bbox: tuple[float, float, float, float] | None = None
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")


def _label_similarity(a: str, b: str, vectors: Mapping[str, object]) -> float:
    if not a or not b:
        return 0.0
    return min(1.0, max(0.0, (cosine(vectors[a], vectors[b]) + 1.0) / 2.0))  # type: ignore[arg-type]


def ground_ir(
    ir: IrGraph,
    grounded: Sequence[GroundedNode],
    embedder: EmbeddingProvider,
    threshold: float,
    provenance: Provenance = Provenance.PREDICTED,
    graph_id: str = "",
    shape_types: Mapping[ShapeHint, NodeType] = DEFAULT_SHAPE_TYPES,
) -> DiagramGraph:
    """Bind abstract identifiers to grounded nodes greedily by descending
    label similarity, one-to-one, ties broken by lexicographic node id.

    IR nodes absent from perception stay in the output as bbox-less nodes;
    losing them would silently drop drawn topology.
    """
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"grounding threshold must lie in (0,1], got {threshold}")

    ir_labels = {n.abstract_id: n.label.strip() for n in ir.ir_nodes}
    texts = sorted({lab for lab in ir_labels.values() if lab} | {g.label.strip() for g in grounded if g.label.strip()})
    vectors = dict(zip(texts, embedder.embed(texts))) if texts else {}

    grounded_by_id = {g.node_id: g for g in grounded}
    candidates = []
    for node in ir.ir_nodes:
        for g in grounded:
            sim = _label_similarity(ir_labels[node.abstract_id], g.label.strip(), vectors)
            if sim >= threshold:
                candidates.append((-sim, g.node_id, node.abstract_id))
    candidates.sort()

    binding: dict[str, str] = {}
    claimed: set[str] = set()
    for neg_sim, grounded_id, abstract_id in candidates:
        if abstract_id in binding or grounded_id in claimed:
            continue
        binding[abstract_id] = grounded_id
        claimed.add(grounded_id)

    nodes: list[Node] = []
    used_ids: set[str] = set()
    node_id_of: dict[str, str] = {}
    for ir_node in ir.ir_nodes:
        if ir_node.abstract_id in binding:
            g = grounded_by_id[binding[ir_node.abstract_id]]
            node_type = shape_types[ir_node.shape] if ir_node.shape is not ShapeHint.NONE else g.node_type
            node = Node(
                id=g.node_id,
                label=ir_node.label if ir_node.label else g.label,
                node_type=node_type,
                bbox=g.bbox,
            )
        else:
            candidate = ir_node.abstract_id
            while candidate in used_ids or candidate in grounded_by_id:
                candidate += "_"
            node = Node(id=candidate, label=ir_node.label, node_type=shape_types[ir_node.shape])
        used_ids.add(node.id)
        node_id_of[ir_node.abstract_id] = node.id
        nodes.append(node)

    edges = [
        Edge(id=f"e{i}", source=node_id_of[e.src], target=node_id_of[e.dst])
        for i, e in enumerate(ir.ir_edges, start=1)
    ]
    groups = [
        Group(id=f"g{i}", label=sub.label, members=tuple(node_id_of[m] for m in sub.members))
        for i, sub in enumerate(ir.ir_subgraphs, start=1)
    ]
    return DiagramGraph(
        graph_id=graph_id,
        nodes=tuple(nodes),
        edges=tuple(edges),
        groups=tuple(groups),
        provenance=provenance,
    )
