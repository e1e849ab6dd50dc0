"""Text-level and image-level scoring plus fixed-weight aggregation.

Alignment and flow arrive as provider judgments already normalized to
[0,1]; this module stays pure arithmetic so every aggregate is deterministic
and testable offline. Vacuous denominators (empty prompt, nothing left
after filtering) resolve to 1 so batch aggregation never divides by zero
silently; callers flag those cases in reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

from .errors import ConfigError, ContractViolation
from .graph import DiagramGraph
from .labels import filter_label
from .providers import EmbeddingProvider, cosine


@dataclass(frozen=True)
class PromptComponent:
    name: str
    description: str = ""


@dataclass(frozen=True)
class StructuredPrompt:
    prompt_id: str
    components: tuple[PromptComponent, ...] = ()
    relations: tuple[tuple[str, str], ...] = ()
    style_constraints: str = ""

    def __post_init__(self) -> None:
        names = [c.name for c in self.components]
        if len(names) != len(set(names)):
            raise ConfigError(f"component names must be unique in prompt {self.prompt_id!r}")


def parse_prompt_document(doc: dict[str, Any]) -> StructuredPrompt:
    return StructuredPrompt(
        prompt_id=str(doc.get("prompt_id", "")),
        components=tuple(
            PromptComponent(name=str(c["name"]), description=str(c.get("description", "")))
            for c in doc.get("components", [])
        ),
        relations=tuple((str(r["src"]), str(r["dst"])) for r in doc.get("relations", [])),
        style_constraints=str(doc.get("style_constraints", "")),
    )


@dataclass(frozen=True)
class ScoreWeights:
    """Aggregation weights; every level must sum to 1."""

    graph_node: float = 0.4
    graph_edge: float = 0.6
    text_coverage: float = 0.3
    text_faithfulness: float = 0.3
    text_alignment: float = 0.4
    image_semantic: float = 0.4
    image_flow: float = 0.4
    image_perceptual: float = 0.2
    overall_graph: float = 0.4
    overall_text: float = 0.3
    overall_image: float = 0.3

    def __post_init__(self) -> None:
        levels = {
            "graph": (self.graph_node, self.graph_edge),
            "text": (self.text_coverage, self.text_faithfulness, self.text_alignment),
            "image": (self.image_semantic, self.image_flow, self.image_perceptual),
            "overall": (self.overall_graph, self.overall_text, self.overall_image),
        }
        for level, weights in levels.items():
            if any(w < 0 for w in weights):
                raise ConfigError(f"{level} weights must be nonnegative: {weights}")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ConfigError(f"{level} weights must sum to 1, got {sum(weights)}")

    def as_document(self) -> dict[str, float]:
        return {
            "graph_node": self.graph_node,
            "graph_edge": self.graph_edge,
            "text_coverage": self.text_coverage,
            "text_faithfulness": self.text_faithfulness,
            "text_alignment": self.text_alignment,
            "image_semantic": self.image_semantic,
            "image_flow": self.image_flow,
            "image_perceptual": self.image_perceptual,
            "overall_graph": self.overall_graph,
            "overall_text": self.overall_text,
            "overall_image": self.overall_image,
        }


DEFAULT_WEIGHTS = ScoreWeights()


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ContractViolation(f"{name} must lie in [0,1], got {value}")


def filtered_node_labels(g: DiagramGraph) -> list[str]:
    return [label for n in g.nodes if (label := filter_label(n.label)) is not None]


def _semantic_hits(queries: Sequence[str], pool: Sequence[str], embedder: EmbeddingProvider, threshold: float) -> int:
    """Count queries semantically matched by at least one pool entry."""
    texts = sorted(set(queries) | set(pool))
    vectors = dict(zip(texts, embedder.embed(texts))) if texts else {}
    hits = 0
    for query in queries:
        qv = vectors[query]
        if any((cosine(qv, vectors[cand]) + 1.0) / 2.0 >= threshold for cand in pool):
            hits += 1
    return hits


def coverage(
    pred: DiagramGraph,
    prompt: StructuredPrompt,
    embedder: EmbeddingProvider,
    threshold: float,
) -> float:
    """Fraction of prompt components recovered by a filtered predicted node."""
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"threshold must lie in (0,1], got {threshold}")
    if not prompt.components:
        return 1.0
    labels = filtered_node_labels(pred)
    if not labels:
        return 0.0
    names = [c.name.strip() for c in prompt.components]
    return _semantic_hits(names, labels, embedder, threshold) / len(names)


def faithfulness(
    pred: DiagramGraph,
    prompt: StructuredPrompt,
    embedder: EmbeddingProvider,
    threshold: float,
) -> float:
    """Fraction of filtered predicted nodes supported by a prompt component;
    hallucinated elements lower this score."""
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"threshold must lie in (0,1], got {threshold}")
    labels = filtered_node_labels(pred)
    if not labels:
        return 1.0
    names = [c.name.strip() for c in prompt.components]
    if not names:
        return 0.0
    return _semantic_hits(labels, names, embedder, threshold) / len(labels)


def text_score(
    coverage_value: float,
    faithfulness_value: float,
    alignment: float,
    weights: ScoreWeights = DEFAULT_WEIGHTS,
) -> float:
    _check_unit("coverage", coverage_value)
    _check_unit("faithfulness", faithfulness_value)
    _check_unit("alignment", alignment)
    return (
        weights.text_coverage * coverage_value
        + weights.text_faithfulness * faithfulness_value
        + weights.text_alignment * alignment
    )


def image_score(
    semantic: float,
    flow: float,
    perceptual_distance: float,
    weights: ScoreWeights = DEFAULT_WEIGHTS,
) -> float:
    """Perceptual distance clamps at 1 before inversion, so arbitrarily bad
    perceptual similarity bottoms out at 0 rather than going negative."""
    _check_unit("semantic", semantic)
    _check_unit("flow", flow)
    if perceptual_distance < 0:
        raise ContractViolation(f"perceptual distance must be nonnegative, got {perceptual_distance}")
    perceptual = 1.0 - min(perceptual_distance, 1.0)
    return weights.image_semantic * semantic + weights.image_flow * flow + weights.image_perceptual * perceptual


def overall_score(
    s_graph: float,
    s_text: float,
    s_image: float,
    weights: ScoreWeights = DEFAULT_WEIGHTS,
) -> float:
    _check_unit("s_graph", s_graph)
    _check_unit("s_text", s_text)
    _check_unit("s_image", s_image)
    return weights.overall_graph * s_graph + weights.overall_text * s_text + weights.overall_image * s_image


@dataclass(frozen=True)
class ScoreReport:
    """Per-item scores with the full configuration fingerprint."""

    s_graph: float
    s_text: float
    s_image: float
    s_overall: float
    node_precision: float = 0.0
    node_recall: float = 0.0
    node_f1: float = 0.0
    edge_precision: float = 0.0
    edge_recall: float = 0.0
    edge_f1: float = 0.0
    coverage: float = 0.0
    faithfulness: float = 0.0
    alignment: float = 0.0
    semantic: float = 0.0
    flow: float = 0.0
    perceptual: float = 0.0
    config: tuple[tuple[str, Any], ...] = ()
    flags: tuple[str, ...] = ()

    def as_document(self) -> dict[str, Any]:
        return {
            "s_graph": self.s_graph,
            "s_text": self.s_text,
            "s_image": self.s_image,
            "s_overall": self.s_overall,
            "node_precision": self.node_precision,
            "node_recall": self.node_recall,
            "node_f1": self.node_f1,
            "edge_precision": self.edge_precision,
            "edge_recall": self.edge_recall,
            "edge_f1": self.edge_f1,
            "coverage": self.coverage,
            "faithfulness": self.faithfulness,
            "alignment": self.alignment,
            "semantic": self.semantic,
            "flow": self.flow,
            "perceptual": self.perceptual,
            "flags": list(self.flags),
        }
