"""Round-trip orchestration: blackboard, fusion arbiter, stage ablation.

Perception stages post findings to an append-only blackboard; the fusion
arbiter consolidates them into grounded nodes deterministically (any
permutation of board entries yields the same output). The topology stage
emits flowchart text which is parsed and grounded back into a diagram
graph. Disabling a stage never fails a run; it only removes that stage's
findings.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

from .docio import read_document
from .errors import ConfigError, SciflowError
from .graph import DiagramGraph, LayoutMeta, NodeType, Provenance, validate_graph
from .mermaid import GroundedNode, MermaidParseError, emit_mermaid, ground_ir, parse_mermaid
from .mermaid import IrEdge, IrGraph, IrNode, ShapeHint
from .providers import EmbeddingProvider, PerceptionBundle, Region, TextItem, load_perception_fixture


class Agent(enum.Enum):
    ENVIRONMENT_CURATOR = "environment_curator"
    SHAPE_HUNTER = "shape_hunter"
    TEXT_SPOTTER = "text_spotter"


ALL_AGENTS = frozenset(Agent)

_PAYLOAD_KINDS = {Agent.ENVIRONMENT_CURATOR: LayoutMeta, Agent.SHAPE_HUNTER: Region, Agent.TEXT_SPOTTER: TextItem}

# Region shape classes carry coarse type evidence, mirroring the drawn-shape
# mapping used for flowchart shape hints.
REGION_NODE_TYPES = {"rect": NodeType.MODULE, "rounded": NodeType.DATA, "diamond": NodeType.OPERATION}

_REGION_SHAPE_HINTS = {"rect": ShapeHint.RECT, "rounded": ShapeHint.ROUNDED, "diamond": ShapeHint.DIAMOND}


class PipelineError(SciflowError):
    def __init__(self, stage: str, message: str, mermaid_text: str | None = None):
        self.stage = stage
        self.mermaid_text = mermaid_text
        detail = f"stage {stage!r}: {message}"
        if mermaid_text is not None:
            detail += f"\n--- offending topology text ---\n{mermaid_text}"
        super().__init__(detail)


class DuplicateEntryError(PipelineError):
    def __init__(self, entry_id: str):
        super().__init__("blackboard", f"duplicate entry id {entry_id!r}")


@dataclass(frozen=True)
class BlackboardEntry:
    entry_id: str
    agent: Agent
    payload: Region | TextItem | LayoutMeta
    confidence: float

    def __post_init__(self) -> None:
        expected = _PAYLOAD_KINDS[self.agent]
        if not isinstance(self.payload, expected):
            raise ValueError(f"{self.agent.value} entries must carry {expected.__name__} payloads")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")


@dataclass(frozen=True)
class Blackboard:
    entries: tuple[BlackboardEntry, ...] = ()

    def ids(self) -> set[str]:
        return {e.entry_id for e in self.entries}


def post(board: Blackboard, entry: BlackboardEntry) -> Blackboard:
    """Append-only; duplicate entry ids conflict."""
    if entry.entry_id in board.ids():
        raise DuplicateEntryError(entry.entry_id)
    return Blackboard(board.entries + (entry,))


def board_from_bundle(bundle: PerceptionBundle, enabled: frozenset[Agent] = ALL_AGENTS) -> Blackboard:
    """Replay a perception fixture onto a fresh board; disabled agents
    contribute nothing (ablation semantics)."""
    board = Blackboard()
    if Agent.SHAPE_HUNTER in enabled:
        for i, region in enumerate(bundle.regions):
            board = post(board, BlackboardEntry(f"region:{i}", Agent.SHAPE_HUNTER, region, region.confidence))
    if Agent.TEXT_SPOTTER in enabled:
        for i, text in enumerate(bundle.texts):
            board = post(board, BlackboardEntry(f"text:{i}", Agent.TEXT_SPOTTER, text, text.confidence))
    if Agent.ENVIRONMENT_CURATOR in enabled and bundle.layout is not None:
        board = post(board, BlackboardEntry("layout:0", Agent.ENVIRONMENT_CURATOR, bundle.layout, 1.0))
    return board


class GroundingMode(enum.Enum):
    CONTAINMENT_THEN_NEAREST = "containment_then_nearest"


@dataclass(frozen=True)
class PipelineConfig:
    enabled_stages: frozenset[Agent] = ALL_AGENTS
    iou_threshold: float = 0.5
    grounding_radius: float = 0.1
    grounding_mode: GroundingMode = GroundingMode.CONTAINMENT_THEN_NEAREST
    node_threshold: float = 0.6

    def __post_init__(self) -> None:
        if not 0.0 < self.iou_threshold < 1.0:
            raise ConfigError(f"iou_threshold must lie in (0,1), got {self.iou_threshold}")
        if self.grounding_radius < 0:
            raise ConfigError("grounding radius must be nonnegative")


def _iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    ix0, iy0 = max(a[0], b[0]), max(a[1], b[1])
    ix1, iy1 = min(a[2], b[2]), min(a[3], b[3])
    inter = max(0.0, ix1 - ix0) * max(0.0, iy1 - iy0)
    if inter == 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def _center(bbox: tuple[float, float, float, float]) -> tuple[float, float]:
    return ((bbox[0] + bbox[2]) / 2.0, (bbox[1] + bbox[3]) / 2.0)


def fuse(board: Blackboard, config: PipelineConfig = PipelineConfig()) -> list[GroundedNode]:
    """Consolidate board findings into grounded nodes.

    Overlapping regions (pairwise IoU at or above the threshold) merge,
    keeping the higher-confidence bbox. Texts ground to the region
    containing their center, else to the nearest region center within the
    configured radius, else become text-only nodes. Output order is
    (y, x, id), independent of entry order.
    """
    regions = sorted(
        ((e.entry_id, e.payload) for e in board.entries if e.agent is Agent.SHAPE_HUNTER),
        key=lambda item: item[0],
    )
    texts = sorted(
        ((e.entry_id, e.payload) for e in board.entries if e.agent is Agent.TEXT_SPOTTER),
        key=lambda item: item[0],
    )

    # Transitive merge via union-find keeps the result order-independent.
    parent = {entry_id: entry_id for entry_id, _ in regions}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, (id_a, region_a) in enumerate(regions):
        for id_b, region_b in regions[i + 1:]:
            if _iou(region_a.bbox, region_b.bbox) >= config.iou_threshold:
                root_a, root_b = find(id_a), find(id_b)
                if root_a != root_b:
                    parent[max(root_a, root_b)] = min(root_a, root_b)

    clusters: dict[str, list[tuple[str, Region]]] = {}
    for entry_id, region in regions:
        clusters.setdefault(find(entry_id), []).append((entry_id, region))

    merged: list[tuple[str, Region]] = []
    for members in clusters.values():
        rep_id, rep = max(members, key=lambda item: (item[1].confidence, item[0]))
        merged.append((rep_id, rep))

    assigned: dict[str, list[tuple[str, TextItem]]] = {rep_id: [] for rep_id, _ in merged}
    loose: list[tuple[str, TextItem]] = []
    for text_id, text in texts:
        cx, cy = _center(text.bbox)
        containers = [
            (rep_id, rep) for rep_id, rep in merged
            if rep.bbox[0] <= cx <= rep.bbox[2] and rep.bbox[1] <= cy <= rep.bbox[3]
        ]
        pool = containers
        if not pool:
            near = []
            for rep_id, rep in merged:
                rx, ry = _center(rep.bbox)
                dist = ((rx - cx) ** 2 + (ry - cy) ** 2) ** 0.5
                if dist <= config.grounding_radius:
                    near.append((dist, rep_id, rep))
            if near:
                near.sort(key=lambda item: (item[0], item[1]))
                pool = [(near[0][1], near[0][2])]
        if pool:
            def center_distance(item: tuple[str, Region]) -> tuple[float, str]:
                rx, ry = _center(item[1].bbox)
                return (((rx - cx) ** 2 + (ry - cy) ** 2) ** 0.5, item[0])

            rep_id, _ = min(pool, key=center_distance)
            assigned[rep_id].append((text_id, text))
        else:
            loose.append((text_id, text))

    grounded: list[GroundedNode] = []
    for rep_id, rep in merged:
        ordered = sorted(assigned[rep_id], key=lambda item: (_center(item[1].bbox)[1], _center(item[1].bbox)[0], item[0]))
        label = " ".join(t.text for _, t in ordered).strip()
        grounded.append(
            GroundedNode(
                node_id=rep_id,
                label=label,
                node_type=REGION_NODE_TYPES.get(rep.shape_class, NodeType.UNKNOWN),
                bbox=rep.bbox,
                confidence=rep.confidence,
            )
        )
    for text_id, text in loose:
        grounded.append(
            GroundedNode(
                node_id=text_id,
                label=text.text,
                node_type=NodeType.UNKNOWN,
                bbox=text.bbox,
                confidence=text.confidence,
            )
        )

    grounded.sort(key=lambda g: (g.bbox[1] if g.bbox else 0.0, g.bbox[0] if g.bbox else 0.0, g.node_id))
    return grounded


# --- topology stage ----------------------------------------------------------


@runtime_checkable
class TopologyCoder(Protocol):
    """Model-backed stage that writes flowchart text for the fused nodes."""

    def emit_ir(self, grounded: Sequence[GroundedNode]) -> str: ...


@dataclass(frozen=True)
class StaticTopology:
    """Replay of a saved topology-coder output."""

    text: str

    def emit_ir(self, grounded: Sequence[GroundedNode]) -> str:
        return self.text


_HINT_BY_TYPE = {NodeType.MODULE: ShapeHint.RECT, NodeType.DATA: ShapeHint.ROUNDED, NodeType.OPERATION: ShapeHint.DIAMOND}


def _mermaid_id(raw: str) -> str:
    cleaned = "".join(c if c.isalnum() or c == "_" else "_" for c in raw)
    if not cleaned or not (cleaned[0].isalpha() or cleaned[0] == "_"):
        cleaned = "n_" + cleaned
    return cleaned


@dataclass(frozen=True)
class TemplateTopology:
    """Deterministic offline coder: writes exactly what perception grounded
    (one declaration per grounded node) plus the arrows listed in the
    fixture. Arrows whose endpoints were not perceived are dropped, which is
    precisely how missing regions propagate to missing edges."""

    arrows: tuple[tuple[str, str], ...] = ()
    flow: str = "TD"

    def emit_ir(self, grounded: Sequence[GroundedNode]) -> str:
        ids = {}
        nodes = []
        for g in grounded:
            ident = _mermaid_id(g.node_id)
            while ident in ids.values():
                ident += "_"
            ids[g.node_id] = ident
            shape = _HINT_BY_TYPE.get(g.node_type, ShapeHint.NONE)
            if shape is ShapeHint.NONE:
                # bare ids cannot carry labels; fall back to a rectangle
                shape = ShapeHint.RECT
            nodes.append(IrNode(ident, g.label.strip(), shape))
        edges = [
            IrEdge(ids[src], ids[dst])
            for src, dst in self.arrows
            if src in ids and dst in ids
        ]
        return emit_mermaid(IrGraph(ir_nodes=tuple(nodes), ir_edges=tuple(edges), flow=self.flow))


# --- figure bundles ----------------------------------------------------------


_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".gif")


@dataclass(frozen=True)
class FigureBundle:
    bundle_id: str
    perception: PerceptionBundle = PerceptionBundle()
    topology: TopologyCoder = StaticTopology("flowchart TD\n")
    image_path: Path | None = None


def load_figure_bundle(path: str | Path) -> FigureBundle:
    """Directory layout: optional image file, `perception.json` fixture,
    and either `topology.mmd` (saved coder output, takes precedence) or
    `arrows.json` (template coder input)."""
    root = Path(path)
    if not root.is_dir():
        raise PipelineError("bundle", f"figure bundle {root} is not a directory")
    perception = PerceptionBundle()
    perception_path = root / "perception.json"
    if perception_path.exists():
        perception = load_perception_fixture(perception_path)

    topology: TopologyCoder
    mermaid_path = root / "topology.mmd"
    arrows_path = root / "arrows.json"
    if mermaid_path.exists():
        topology = StaticTopology(mermaid_path.read_text(encoding="utf-8"))
    elif arrows_path.exists():
        doc = read_document(arrows_path)
        arrows = tuple((str(a[0]), str(a[1])) for a in doc.get("arrows", []))
        topology = TemplateTopology(arrows=arrows, flow=str(doc.get("flow", "TD")))
    else:
        raise PipelineError("topology_coder", f"bundle {root} lacks topology.mmd or arrows.json")

    image_path = None
    for candidate in sorted(root.iterdir()):
        if candidate.suffix.lower() in _IMAGE_SUFFIXES:
            image_path = candidate
            break
    return FigureBundle(bundle_id=root.name, perception=perception, topology=topology, image_path=image_path)


def run_round_trip(
    bundle: FigureBundle,
    embedder: EmbeddingProvider,
    config: PipelineConfig = PipelineConfig(),
    provenance: Provenance = Provenance.PREDICTED,
) -> DiagramGraph:
    """Perception -> fusion -> topology -> parse -> ground, bit-reproducible
    for fixed fixtures and config."""
    board = board_from_bundle(bundle.perception, config.enabled_stages)
    return round_trip_from_board(board, bundle, embedder, config, provenance)


def round_trip_from_board(
    board: Blackboard,
    bundle: FigureBundle,
    embedder: EmbeddingProvider,
    config: PipelineConfig = PipelineConfig(),
    provenance: Provenance = Provenance.PREDICTED,
) -> DiagramGraph:
    """Stages downstream of the perception barrier; the board's entry order
    never influences the output."""
    grounded = fuse(board, config)

    try:
        text = bundle.topology.emit_ir(grounded)
    except Exception as exc:
        raise PipelineError("topology_coder", str(exc)) from exc

    try:
        ir = parse_mermaid(text)
    except MermaidParseError as exc:
        raise PipelineError("graph_architect", exc.diagnostic, mermaid_text=text) from exc

    graph = ground_ir(
        ir,
        grounded,
        embedder,
        threshold=config.node_threshold,
        provenance=provenance,
        graph_id=bundle.bundle_id,
    )
    if Agent.ENVIRONMENT_CURATOR in config.enabled_stages and bundle.perception.layout is not None:
        graph = graph.with_layout(bundle.perception.layout)

    report = validate_graph(graph)
    if not report.is_valid:
        details = "; ".join(v.message for v in report.violations)
        raise PipelineError("graph_architect", f"round-trip output failed validation: {details}")
    return graph
