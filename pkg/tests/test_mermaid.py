import itertools
import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sciflow.errors import ConfigError
from sciflow.graph import NodeType, Provenance, validate_graph
from sciflow.mermaid import (
    EdgeStyle,
    GroundedNode,
    IrEdge,
    IrGraph,
    IrNode,
    IrSubgraph,
    MermaidParseError,
    ShapeHint,
    UnsupportedConstructError,
    emit_mermaid,
    ground_ir,
    parse_mermaid,
)
from sciflow.providers import TrigramEmbedder, cosine

from conftest import LABEL_POOL
from mermaid_corpus import NEGATIVE, POSITIVE


class TestCorpus:
    @pytest.mark.parametrize("text,expected", POSITIVE, ids=range(len(POSITIVE)))
    def test_positive_corpus(self, text, expected):
        assert parse_mermaid(text) == expected

    @pytest.mark.parametrize("text,line,fragment", NEGATIVE, ids=range(len(NEGATIVE)))
    def test_negative_corpus_diagnostics(self, text, line, fragment):
        with pytest.raises(MermaidParseError) as err:
            parse_mermaid(text)
        assert err.value.line == line
        assert fragment in str(err.value)
        assert re.match(r"^\d+:\d+: ", err.value.diagnostic)

    def test_unsupported_constructs_name_themselves(self):
        with pytest.raises(UnsupportedConstructError, match="classDef"):
            parse_mermaid("flowchart TD\nclassDef foo bar\n")
        with pytest.raises(UnsupportedConstructError, match="'==>'"):
            parse_mermaid("flowchart TD\nA ==> B\n")


_WORDS = ["Gate", "Mixer", "Probe", "Lens", "Bridge", "Patch Embed", "Add-Norm", "x 2"]


@st.composite
def ir_graphs(draw):
    n = draw(st.integers(0, 7))
    nodes = []
    for i in range(n):
        ident = f"n{i}"
        shape = draw(st.sampled_from(list(ShapeHint)))
        if shape is ShapeHint.NONE:
            label = ident  # bare ids carry their id as label
        else:
            label = draw(st.sampled_from(_WORDS + [""]))
        nodes.append(IrNode(ident, label, shape))
    ids = [node.abstract_id for node in nodes]
    edges = []
    if ids:
        for _ in range(draw(st.integers(0, 8))):
            edges.append(
                IrEdge(draw(st.sampled_from(ids)), draw(st.sampled_from(ids)), draw(st.sampled_from(list(EdgeStyle))))
            )
    subgraphs = []
    if len(ids) >= 2 and draw(st.booleans()):
        cut = draw(st.integers(1, len(ids) - 1))
        subgraphs.append(IrSubgraph("Stage One", tuple(ids[:cut])))
        if draw(st.booleans()):
            subgraphs.append(IrSubgraph("Stage Two", tuple(ids[cut:])))
    return IrGraph(
        ir_nodes=tuple(nodes),
        ir_edges=tuple(edges),
        ir_subgraphs=tuple(subgraphs),
        flow=draw(st.sampled_from(["TD", "LR"])),
    )


class TestRoundTrip:
    @settings(max_examples=300)
    @given(ir_graphs())
    def test_emit_then_parse_is_identity(self, ir):
        assert parse_mermaid(emit_mermaid(ir)) == ir

    def test_emitter_rejects_inexpressible_labels(self):
        with pytest.raises(ValueError):
            emit_mermaid(IrGraph(ir_nodes=(IrNode("A", "has ] bracket", ShapeHint.RECT),)))
        with pytest.raises(ValueError):
            emit_mermaid(IrGraph(ir_nodes=(IrNode("A", "not the id", ShapeHint.NONE),)))


def grounded(node_id, label, bbox=(0.1, 0.1, 0.2, 0.2), node_type=NodeType.MODULE):
    return GroundedNode(node_id=node_id, label=label, node_type=node_type, bbox=bbox)


class TestGrounding:
    def test_exact_label_binds_and_inherits_bbox(self):
        ir = parse_mermaid("flowchart TD\nA[Encoder]\n")
        g = ground_ir(ir, [grounded("r0", "Encoder", bbox=(0.2, 0.3, 0.4, 0.5))], TrigramEmbedder(), 0.6)
        assert len(g.nodes) == 1
        node = g.nodes[0]
        assert node.id == "r0"
        assert node.bbox == (0.2, 0.3, 0.4, 0.5)
        assert node.node_type is NodeType.MODULE

    def test_empty_grounded_list_yields_bboxless_nodes(self):
        ir = parse_mermaid("flowchart TD\nA[Gate] --> B[Mixer]\n")
        g = ground_ir(ir, [], TrigramEmbedder(), 0.6)
        assert len(g.nodes) == 2
        assert all(n.bbox is None for n in g.nodes)
        assert len(g.edges) == 1

    def test_dashed_edges_are_preserved_as_edges(self):
        ir = parse_mermaid("flowchart TD\nA[Gate] -.-> B[Mixer]\nB --> C[Probe]\n")
        g = ground_ir(ir, [], TrigramEmbedder(), 0.6)
        assert len(g.edges) == 2  # drawn relations are never dropped

    def test_edges_and_subgraphs_map_through_binding(self):
        ir = parse_mermaid("flowchart TD\nsubgraph Stage\nA[Gate]\nend\nA --> B[Mixer]\n")
        g = ground_ir(ir, [grounded("r0", "Gate"), grounded("r1", "Mixer", bbox=(0.5, 0.5, 0.6, 0.6))], TrigramEmbedder(), 0.6)
        ids = {n.id for n in g.nodes}
        assert ids == {"r0", "r1"}
        assert [(e.source, e.target) for e in g.edges] == [("r0", "r1")]
        assert g.groups[0].members == ("r0",)
        assert validate_graph(g).is_valid

    def test_output_is_validator_clean(self):
        rng = random.Random(3)
        emb = TrigramEmbedder()
        for trial in range(25):
            labels = rng.sample(LABEL_POOL, rng.randint(1, 6))
            lines = ["flowchart TD"] + [f"x{i}[{lab}]" for i, lab in enumerate(labels)]
            for i in range(len(labels) - 1):
                lines.append(f"x{i} --> x{i+1}")
            ir = parse_mermaid("\n".join(lines))
            pool = [grounded(f"r{j}", lab) for j, lab in enumerate(rng.sample(labels, rng.randint(0, len(labels))))]
            g = ground_ir(ir, pool, emb, 0.6)
            assert validate_graph(g).is_valid
            assert len(g.nodes) == len(labels)

    def test_deterministic(self):
        ir = parse_mermaid("flowchart TD\nA[Gate]\nB[Gate2]\n")
        pool = [grounded("r1", "Gate"), grounded("r0", "Gate")]
        emb = TrigramEmbedder()
        first = ground_ir(ir, pool, emb, 0.6)
        assert all(ground_ir(ir, pool, emb, 0.6) == first for _ in range(3))

    def test_tie_broken_by_lexicographic_node_id(self):
        ir = parse_mermaid("flowchart TD\nA[Gate]\n")
        pool = [grounded("r1", "Gate"), grounded("r0", "Gate")]
        g = ground_ir(ir, pool, TrigramEmbedder(), 0.6)
        assert g.nodes[0].id == "r0"

    def test_provenance_as_requested(self):
        ir = parse_mermaid("flowchart TD\nA\n")
        g = ground_ir(ir, [], TrigramEmbedder(), 0.6, provenance=Provenance.CANONICAL)
        assert g.provenance is Provenance.CANONICAL

    def test_invalid_threshold(self):
        with pytest.raises(ConfigError):
            ground_ir(IrGraph(), [], TrigramEmbedder(), 0.0)

    def test_empty_labels_never_bind(self):
        ir = parse_mermaid("flowchart TD\nA[]\n")
        g = ground_ir(ir, [grounded("r0", "")], TrigramEmbedder(), 0.6)
        assert g.nodes[0].bbox is None  # unbound, stays abstract

    def test_greedy_matches_exhaustive_assignment(self):
        """On permuted-label instances the greedy one-to-one binding reaches
        the brute-force maximum-similarity assignment total."""
        emb = TrigramEmbedder()
        rng = random.Random(5)
        for trial in range(20):
            k = rng.randint(1, 5)
            labels = rng.sample(LABEL_POOL, k)
            # occasionally duplicate a label to exercise ties
            if k >= 2 and rng.random() < 0.4:
                labels[rng.randrange(k)] = labels[0]
            ir_lines = ["flowchart TD"] + [f"a{i}[{lab}]" for i, lab in enumerate(labels)]
            ir = parse_mermaid("\n".join(ir_lines))
            permuted = labels[:]
            rng.shuffle(permuted)
            pool = [grounded(f"r{j}", lab) for j, lab in enumerate(permuted)]

            vectors = dict(zip(labels + permuted, emb.embed(labels + permuted)))

            def sim(a, b):
                if not a or not b:
                    return 0.0
                return (cosine(vectors[a], vectors[b]) + 1.0) / 2.0

            # brute force: best injective assignment using only sims >= threshold
            ir_nodes = sorted(ir.ir_nodes, key=lambda n: n.abstract_id)
            best_total = 0.0
            for size in range(min(k, len(pool)), -1, -1):
                for ir_subset in itertools.combinations(range(len(ir_nodes)), size):
                    for g_subset in itertools.permutations(range(len(pool)), size):
                        sims = [sim(ir_nodes[i].label, pool[j].label) for i, j in zip(ir_subset, g_subset)]
                        if all(s >= 0.6 for s in sims):
                            best_total = max(best_total, sum(sims))

            g = ground_ir(ir, pool, emb, 0.6)
            # bound output nodes carry the grounded id and the IR label, so
            # the achieved assignment total falls straight out of the graph
            by_id = {p.node_id: p for p in pool}
            greedy_total = sum(sim(n.label, by_id[n.id].label) for n in g.nodes if n.id in by_id)
            assert greedy_total == pytest.approx(best_total)
