"""Structure-first evaluation toolkit for scientific diagram generation."""

from .graph import (
    DiagramGraph,
    Difficulty,
    DifficultyConfig,
    Edge,
    FlowDirection,
    GraphStats,
    Group,
    LayoutMeta,
    Node,
    NodeType,
    Provenance,
    ValidationReport,
    difficulty_level,
    graph_stats,
    parse_graph_document,
    serialize_graph,
    validate_graph,
)
from .matching import (
    EdgeVerdict,
    MatchResult,
    NodeMatching,
    Verdict,
    graph_score,
    match_edges,
    match_graphs,
    match_nodes,
    node_similarity,
    score_edges,
    score_nodes,
)
from .mermaid import (
    EdgeStyle,
    GroundedNode,
    IrEdge,
    IrGraph,
    IrNode,
    IrSubgraph,
    MermaidParseError,
    ShapeHint,
    emit_mermaid,
    ground_ir,
    parse_mermaid,
)
from .metrics import (
    DEFAULT_WEIGHTS,
    ScoreReport,
    ScoreWeights,
    StructuredPrompt,
    coverage,
    faithfulness,
    image_score,
    overall_score,
    text_score,
)
from .labels import filter_label
from .pipeline import (
    Agent,
    Blackboard,
    BlackboardEntry,
    FigureBundle,
    PipelineConfig,
    PipelineError,
    fuse,
    load_figure_bundle,
    post,
    run_round_trip,
)
from .providers import (
    ConstantJudge,
    EmbeddingProvider,
    IdentityPerceptual,
    JudgeProvider,
    PerceptionBundle,
    PerceptualProvider,
    TrigramEmbedder,
    constant_judge,
    load_perception_fixture,
)
from .verify import (
    AgreementReport,
    Edit,
    EditKind,
    EditLog,
    agreement,
    apply_edit,
    apply_edits,
    batch_agreement,
    replay_log,
)

__version__ = "0.1.0"
