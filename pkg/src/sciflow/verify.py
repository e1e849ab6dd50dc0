"""Identity-consistent verification: edit application, replay, agreement.

Verification edits an automatically extracted graph instead of redrawing
it, so surviving elements keep their original ids and agreement reduces to
pure identity-set counting, with no semantic matching anywhere on this
path. Excluding a node cascades to its incident edges; every cascade step
is logged so edit statistics stay faithful.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Any, Iterable, Sequence

from .errors import SciflowError
from .graph import DiagramGraph, Edge, Node, NodeType, Provenance


class VerifyError(SciflowError):
    code = "VERIFY_ERROR"


class NotFoundError(VerifyError):
    code = "NOT_FOUND"


class ProtocolError(VerifyError):
    """Edit outside the verification protocol (e.g. excluding an element the
    annotator added; additions are reverted with `retract` instead)."""

    code = "PROTOCOL_ERROR"


class ProvenanceError(VerifyError):
    code = "PROVENANCE_ERROR"


class EditKind(enum.Enum):
    EXCLUDE_NODE = "exclude_node"
    EXCLUDE_EDGE = "exclude_edge"
    ADD_NODE = "add_node"
    ADD_EDGE = "add_edge"
    RETRACT = "retract"  # internal: revert one's own addition


@dataclass(frozen=True)
class Edit:
    edit_id: str
    kind: EditKind
    target_id: str | None = None
    node: Node | None = None
    edge: Edge | None = None
    annotator: str = ""
    timestamp: float = 0.0
    cascade_of: str | None = None


def apply_edit(g: DiagramGraph, edit: Edit) -> tuple[DiagramGraph, tuple[Edit, ...]]:
    """Apply one edit, returning the new graph and every log entry it
    produced (the edit itself plus one entry per cascaded edge removal).
    Surviving elements keep their ids."""
    if edit.kind is EditKind.EXCLUDE_NODE:
        return _remove_node(g, edit, require_human=False)
    if edit.kind is EditKind.EXCLUDE_EDGE:
        return _remove_edge(g, edit, require_human=False)
    if edit.kind is EditKind.ADD_NODE:
        return _add_node(g, edit)
    if edit.kind is EditKind.ADD_EDGE:
        return _add_edge(g, edit)
    if edit.kind is EditKind.RETRACT:
        return _retract(g, edit)
    raise ProtocolError(f"unknown edit kind {edit.kind!r}")


def _remove_node(g: DiagramGraph, edit: Edit, require_human: bool) -> tuple[DiagramGraph, tuple[Edit, ...]]:
    if edit.target_id is None:
        raise ProtocolError(f"edit {edit.edit_id!r} needs a target_id")
    try:
        node = g.node(edit.target_id)
    except KeyError:
        raise NotFoundError(f"node {edit.target_id!r} not found") from None
    if node.human_added and not require_human:
        raise ProtocolError(f"node {node.id!r} was human-added; use a retract edit instead")
    if require_human and not node.human_added:
        raise ProtocolError(f"node {node.id!r} is an original element; use exclude_node instead")

    incident = sorted((e for e in g.edges if node.id in (e.source, e.target)), key=lambda e: e.id)
    entries = [replace(edit, node=node)]
    for idx, e in enumerate(incident, start=1):
        entries.append(
            Edit(
                edit_id=f"{edit.edit_id}:cascade:{idx}",
                kind=EditKind.RETRACT if e.human_added else EditKind.EXCLUDE_EDGE,
                target_id=e.id,
                edge=e,
                annotator=edit.annotator,
                timestamp=edit.timestamp,
                cascade_of=edit.edit_id,
            )
        )
    incident_ids = {e.id for e in incident}
    new_graph = replace(
        g,
        nodes=tuple(n for n in g.nodes if n.id != node.id),
        edges=tuple(e for e in g.edges if e.id not in incident_ids),
        groups=_prune_groups(g, {node.id}),
    )
    return new_graph, tuple(entries)


def _prune_groups(g: DiagramGraph, removed_nodes: set[str]):
    groups = []
    for grp in g.groups:
        members = tuple(m for m in grp.members if m not in removed_nodes)
        if members:
            groups.append(replace(grp, members=members))
    kept = {grp.id for grp in groups}
    return tuple(grp if grp.parent is None or grp.parent in kept else replace(grp, parent=None) for grp in groups)


def _remove_edge(g: DiagramGraph, edit: Edit, require_human: bool) -> tuple[DiagramGraph, tuple[Edit, ...]]:
    if edit.target_id is None:
        raise ProtocolError(f"edit {edit.edit_id!r} needs a target_id")
    try:
        edge = g.edge(edit.target_id)
    except KeyError:
        raise NotFoundError(f"edge {edit.target_id!r} not found") from None
    if edge.human_added and not require_human:
        raise ProtocolError(f"edge {edge.id!r} was human-added; use a retract edit instead")
    if require_human and not edge.human_added:
        raise ProtocolError(f"edge {edge.id!r} is an original element; use exclude_edge instead")
    new_graph = replace(g, edges=tuple(e for e in g.edges if e.id != edge.id))
    return new_graph, (replace(edit, edge=edge),)


def _add_node(g: DiagramGraph, edit: Edit) -> tuple[DiagramGraph, tuple[Edit, ...]]:
    if edit.node is None:
        raise ProtocolError(f"edit {edit.edit_id!r} needs a node payload")
    if not edit.node.human_added:
        raise ProtocolError(f"added node {edit.node.id!r} must be flagged human_added")
    if edit.node.id in g.node_ids():
        raise ProtocolError(f"node id {edit.node.id!r} already exists; additions need fresh ids")
    return replace(g, nodes=g.nodes + (edit.node,)), (edit,)


def _add_edge(g: DiagramGraph, edit: Edit) -> tuple[DiagramGraph, tuple[Edit, ...]]:
    if edit.edge is None:
        raise ProtocolError(f"edit {edit.edit_id!r} needs an edge payload")
    if not edit.edge.human_added:
        raise ProtocolError(f"added edge {edit.edge.id!r} must be flagged human_added")
    if edit.edge.id in g.edge_ids():
        raise ProtocolError(f"edge id {edit.edge.id!r} already exists; additions need fresh ids")
    node_ids = g.node_ids()
    for endpoint in (edit.edge.source, edit.edge.target):
        if endpoint not in node_ids:
            raise NotFoundError(f"edge endpoint {endpoint!r} not found")
    return replace(g, edges=g.edges + (edit.edge,)), (edit,)


def _retract(g: DiagramGraph, edit: Edit) -> tuple[DiagramGraph, tuple[Edit, ...]]:
    if edit.target_id is None:
        raise ProtocolError(f"edit {edit.edit_id!r} needs a target_id")
    if edit.target_id in g.node_ids():
        return _remove_node(g, edit, require_human=True)
    if edit.target_id in g.edge_ids():
        return _remove_edge(g, edit, require_human=True)
    raise NotFoundError(f"element {edit.target_id!r} not found")


def apply_edits(g: DiagramGraph, edits: Iterable[Edit]) -> tuple[DiagramGraph, tuple[Edit, ...]]:
    entries: list[Edit] = []
    for edit in edits:
        g, produced = apply_edit(g, edit)
        entries.extend(produced)
    return g, tuple(entries)


@dataclass(frozen=True)
class EditSummary:
    removed_nodes: int
    removed_edges: int
    added_nodes: int
    added_edges: int


@dataclass(frozen=True)
class EditLog:
    graph_id: str
    entries: tuple[Edit, ...] = ()
    total_time: float = 0.0

    @property
    def summary(self) -> EditSummary:
        removed_nodes = removed_edges = added_nodes = added_edges = 0
        for e in self.entries:
            if e.kind is EditKind.EXCLUDE_NODE:
                removed_nodes += 1
            elif e.kind is EditKind.EXCLUDE_EDGE:
                removed_edges += 1
            elif e.kind is EditKind.ADD_NODE:
                added_nodes += 1
            elif e.kind is EditKind.ADD_EDGE:
                added_edges += 1
            elif e.kind is EditKind.RETRACT:
                if e.node is not None:
                    added_nodes -= 1
                else:
                    added_edges -= 1
        return EditSummary(removed_nodes, removed_edges, added_nodes, added_edges)


def replay_log(auto: DiagramGraph, log: EditLog) -> DiagramGraph:
    """Re-apply a log over the automatic graph. Cascade entries are verified
    (their target must already be gone) rather than re-applied, because
    apply_edit regenerates them."""
    g = replace(auto, provenance=Provenance.VERIFIED)
    for entry in log.entries:
        if entry.cascade_of is not None:
            if entry.target_id in g.edge_ids() or entry.target_id in g.node_ids():
                raise ProtocolError(
                    f"cascade entry {entry.edit_id!r} targets {entry.target_id!r} which is still present"
                )
            continue
        g, _ = apply_edit(g, entry)
    return g


# --- agreement ----------------------------------------------------------------


@dataclass(frozen=True)
class AgreementCounts:
    retained: int
    removed: int
    added: int


@dataclass(frozen=True)
class AgreementReport:
    node_precision: float
    node_recall: float
    node_f1: float
    edge_precision: float
    edge_recall: float
    edge_f1: float
    node_counts: AgreementCounts
    edge_counts: AgreementCounts

    def as_document(self) -> dict[str, Any]:
        return {
            "node_precision": self.node_precision,
            "node_recall": self.node_recall,
            "node_f1": self.node_f1,
            "edge_precision": self.edge_precision,
            "edge_recall": self.edge_recall,
            "edge_f1": self.edge_f1,
            "node_counts": {"retained": self.node_counts.retained, "removed": self.node_counts.removed, "added": self.node_counts.added},
            "edge_counts": {"retained": self.edge_counts.retained, "removed": self.edge_counts.removed, "added": self.edge_counts.added},
        }


def _identity_counts(auto_ids: set[str], verified_elements: Sequence, kind: str) -> AgreementCounts:
    retained = 0
    added = 0
    for element in verified_elements:
        if element.human_added:
            if element.id in auto_ids:
                raise ProvenanceError(f"{kind} {element.id!r} is human-added but shadows an automatic id")
            added += 1
        else:
            if element.id not in auto_ids:
                raise ProvenanceError(f"{kind} {element.id!r} does not derive from the automatic graph")
            retained += 1
    removed = len(auto_ids) - retained
    return AgreementCounts(retained, removed, added)


def _agreement_prf(counts: AgreementCounts) -> tuple[float, float, float]:
    precision = 1.0 if counts.retained + counts.removed == 0 else counts.retained / (counts.retained + counts.removed)
    recall = 1.0 if counts.retained + counts.added == 0 else counts.retained / (counts.retained + counts.added)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def agreement(auto: DiagramGraph, verified: DiagramGraph) -> AgreementReport:
    """Exact identity-consistency agreement: retained elements count as
    correct, removals and additions as mismatches."""
    node_counts = _identity_counts({n.id for n in auto.nodes}, verified.nodes, "node")
    edge_counts = _identity_counts({e.id for e in auto.edges}, verified.edges, "edge")
    node_p, node_r, node_f1 = _agreement_prf(node_counts)
    edge_p, edge_r, edge_f1 = _agreement_prf(edge_counts)
    return AgreementReport(node_p, node_r, node_f1, edge_p, edge_r, edge_f1, node_counts, edge_counts)


@dataclass(frozen=True)
class BatchAgreement:
    per_domain: tuple[tuple[str, AgreementReport], ...]
    overall: AgreementReport


def _pooled_report(counts: Sequence[tuple[AgreementCounts, AgreementCounts]]) -> AgreementReport:
    node = AgreementCounts(
        sum(c.retained for c, _ in counts), sum(c.removed for c, _ in counts), sum(c.added for c, _ in counts)
    )
    edge = AgreementCounts(
        sum(c.retained for _, c in counts), sum(c.removed for _, c in counts), sum(c.added for _, c in counts)
    )
    node_p, node_r, node_f1 = _agreement_prf(node)
    edge_p, edge_r, edge_f1 = _agreement_prf(edge)
    return AgreementReport(node_p, node_r, node_f1, edge_p, edge_r, edge_f1, node, edge)


def batch_agreement(pairs: Sequence[tuple[str, DiagramGraph, DiagramGraph]]) -> BatchAgreement:
    """Micro-averaged agreement per domain plus overall (pooled counts)."""
    by_domain: dict[str, list[tuple[AgreementCounts, AgreementCounts]]] = {}
    all_counts: list[tuple[AgreementCounts, AgreementCounts]] = []
    for domain, auto, verified in pairs:
        report = agreement(auto, verified)
        by_domain.setdefault(domain, []).append((report.node_counts, report.edge_counts))
        all_counts.append((report.node_counts, report.edge_counts))
    per_domain = tuple((domain, _pooled_report(counts)) for domain, counts in sorted(by_domain.items()))
    return BatchAgreement(per_domain=per_domain, overall=_pooled_report(all_counts))


def format_agreement_table(batch: BatchAgreement) -> str:
    """Render the per-domain agreement table (node and edge P/R/F1 columns)."""
    header = f"{'Domain':<24} {'Node P':>7} {'Node R':>7} {'Node F1':>8} {'Edge P':>7} {'Edge R':>7} {'Edge F1':>8}"
    lines = [header, "-" * len(header)]

    def row(name: str, r: AgreementReport) -> str:
        return (
            f"{name:<24} {r.node_precision:>7.2f} {r.node_recall:>7.2f} {r.node_f1:>8.2f} "
            f"{r.edge_precision:>7.2f} {r.edge_recall:>7.2f} {r.edge_f1:>8.2f}"
        )

    for domain, report in batch.per_domain:
        lines.append(row(domain, report))
    lines.append(row("Overall", batch.overall))
    return "\n".join(lines)


# --- edit documents -------------------------------------------------------------


def edit_document(edit: Edit) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "edit_id": edit.edit_id,
        "kind": edit.kind.value,
        "target_id": edit.target_id,
        "node": None,
        "edge": None,
        "annotator": edit.annotator,
        "timestamp": edit.timestamp,
        "cascade_of": edit.cascade_of,
    }
    if edit.node is not None:
        doc["node"] = {
            "id": edit.node.id,
            "label": edit.node.label,
            "node_type": edit.node.node_type.value,
            "bbox": list(edit.node.bbox) if edit.node.bbox else None,
            "human_added": edit.node.human_added,
        }
    if edit.edge is not None:
        doc["edge"] = {
            "id": edit.edge.id,
            "source": edit.edge.source,
            "target": edit.edge.target,
            "directed": edit.edge.directed,
            "human_added": edit.edge.human_added,
        }
    return doc


def parse_edit_document(doc: dict[str, Any]) -> Edit:
    try:
        kind = EditKind(doc["kind"])
    except (KeyError, ValueError):
        raise ProtocolError(f"invalid edit kind {doc.get('kind')!r}") from None
    node = None
    if doc.get("node"):
        nd = doc["node"]
        node = Node(
            id=str(nd["id"]),
            label=str(nd.get("label", "")),
            node_type=NodeType(nd.get("node_type", "unknown")),
            bbox=tuple(nd["bbox"]) if nd.get("bbox") else None,
            human_added=bool(nd.get("human_added", False)),
        )
    edge = None
    if doc.get("edge"):
        ed = doc["edge"]
        edge = Edge(
            id=str(ed["id"]),
            source=str(ed["source"]),
            target=str(ed["target"]),
            directed=bool(ed.get("directed", True)),
            human_added=bool(ed.get("human_added", False)),
        )
    return Edit(
        edit_id=str(doc.get("edit_id", "")),
        kind=kind,
        target_id=doc.get("target_id"),
        node=node,
        edge=edge,
        annotator=str(doc.get("annotator", "")),
        timestamp=float(doc.get("timestamp", 0.0)),
        cascade_of=doc.get("cascade_of"),
    )


def log_document(log: EditLog) -> dict[str, Any]:
    summary = log.summary
    return {
        "graph_id": log.graph_id,
        "entries": [edit_document(e) for e in log.entries],
        "summary": {
            "removed_nodes": summary.removed_nodes,
            "removed_edges": summary.removed_edges,
            "added_nodes": summary.added_nodes,
            "added_edges": summary.added_edges,
        },
        "total_time": log.total_time,
    }


def parse_log_document(doc: dict[str, Any]) -> EditLog:
    return EditLog(
        graph_id=str(doc.get("graph_id", "")),
        entries=tuple(parse_edit_document(e) for e in doc.get("entries", [])),
        total_time=float(doc.get("total_time", 0.0)),
    )
