"""Hand-written flowchart-subset corpus: positive files with their expected
parses, and malformed files that must produce located diagnostics."""

from sciflow.mermaid import EdgeStyle, IrEdge, IrGraph, IrNode, IrSubgraph, ShapeHint

R, O, D, N = ShapeHint.RECT, ShapeHint.ROUNDED, ShapeHint.DIAMOND, ShapeHint.NONE
SOLID, DASH = EdgeStyle.SOLID, EdgeStyle.DASHED


def g(nodes=(), edges=(), subs=(), flow="TD"):
    return IrGraph(
        ir_nodes=tuple(IrNode(*n) for n in nodes),
        ir_edges=tuple(IrEdge(*e) for e in edges),
        ir_subgraphs=tuple(IrSubgraph(label, tuple(members)) for label, members in subs),
        flow=flow,
    )


POSITIVE = [
    # headers and empty bodies
    ("flowchart TD\n", g()),
    ("flowchart LR\n", g(flow="LR")),
    ("flowchart TD", g()),
    ("\n\nflowchart TD\n\n", g()),
    ("%% leading comment\nflowchart TD\n", g()),
    ("flowchart TD\n%% nothing else\n", g()),
    # single node declarations, every shape
    ("flowchart TD\nA[Encoder]\n", g([("A", "Encoder", R)])),
    ("flowchart TD\nA(Buffer)\n", g([("A", "Buffer", O)])),
    ("flowchart TD\nA{Merge}\n", g([("A", "Merge", D)])),
    ("flowchart TD\nA\n", g([("A", "A", N)])),
    ("flowchart LR\nnode_1[Input Tokens]\n", g([("node_1", "Input Tokens", R)], flow="LR")),
    ("flowchart TD\nA[]\n", g([("A", "", R)])),
    ("flowchart TD\nA[  padded  ]\n", g([("A", "padded", R)])),
    ("flowchart TD\n  A[Indented]\n", g([("A", "Indented", R)])),
    ("flowchart TD\nA[label with spaces]\nB(another one)\n", g([("A", "label with spaces", R), ("B", "another one", O)])),
    ("flowchart TD\n_x[Underscore Start]\n", g([("_x", "Underscore Start", R)])),
    ("flowchart TD\nA9[Alnum Id]\n", g([("A9", "Alnum Id", R)])),
    # the minimal edge case from the grammar
    ("flowchart TD\nA[Encoder] --> B[Decoder]\n", g([("A", "Encoder", R), ("B", "Decoder", R)], [("A", "B", SOLID)])),
    ("flowchart LR\nA --> B\nA -.-> C\n", g([("A", "A", N), ("B", "B", N), ("C", "C", N)], [("A", "B", SOLID), ("A", "C", DASH)], flow="LR")),
    ("flowchart TD\nA --> B\n", g([("A", "A", N), ("B", "B", N)], [("A", "B", SOLID)])),
    ("flowchart TD\nA -.-> B\n", g([("A", "A", N), ("B", "B", N)], [("A", "B", DASH)])),
    ("flowchart TD\nA-->B\n", g([("A", "A", N), ("B", "B", N)], [("A", "B", SOLID)])),
    ("flowchart TD\nA-.->B\n", g([("A", "A", N), ("B", "B", N)], [("A", "B", DASH)])),
    ("flowchart TD\nA   -->   B\n", g([("A", "A", N), ("B", "B", N)], [("A", "B", SOLID)])),
    ("flowchart TD\nA[Conv] --> B\n", g([("A", "Conv", R), ("B", "B", N)], [("A", "B", SOLID)])),
    ("flowchart TD\nA --> B(Pool)\n", g([("A", "A", N), ("B", "Pool", O)], [("A", "B", SOLID)])),
    ("flowchart TD\nA{Gate} -.-> B{Switch}\n", g([("A", "Gate", D), ("B", "Switch", D)], [("A", "B", DASH)])),
    # declaration then reference
    ("flowchart TD\nA[Encoder]\nB[Decoder]\nA --> B\n", g([("A", "Encoder", R), ("B", "Decoder", R)], [("A", "B", SOLID)])),
    ("flowchart TD\nA --> B\nB[Late Label]\n", g([("A", "A", N), ("B", "Late Label", R)], [("A", "B", SOLID)])),
    ("flowchart TD\nA[Enc] --> B\nA --> C\n", g([("A", "Enc", R), ("B", "B", N), ("C", "C", N)], [("A", "B", SOLID), ("A", "C", SOLID)])),
    # self loop and parallel edges
    ("flowchart TD\nA --> A\n", g([("A", "A", N)], [("A", "A", SOLID)])),
    ("flowchart TD\nA --> B\nA --> B\n", g([("A", "A", N), ("B", "B", N)], [("A", "B", SOLID), ("A", "B", SOLID)])),
    ("flowchart TD\nA --> B\nA -.-> B\n", g([("A", "A", N), ("B", "B", N)], [("A", "B", SOLID), ("A", "B", DASH)])),
    ("flowchart TD\nA --> B\nB --> A\n", g([("A", "A", N), ("B", "B", N)], [("A", "B", SOLID), ("B", "A", SOLID)])),
    # chains written line by line
    (
        "flowchart TD\nA[In] --> B[Mid]\nB --> C[Out]\n",
        g([("A", "In", R), ("B", "Mid", R), ("C", "Out", R)], [("A", "B", SOLID), ("B", "C", SOLID)]),
    ),
    (
        "flowchart LR\nX(Src) -.-> Y(Buf)\nY -.-> Z(Sink)\n",
        g([("X", "Src", O), ("Y", "Buf", O), ("Z", "Sink", O)], [("X", "Y", DASH), ("Y", "Z", DASH)], flow="LR"),
    ),
    # comments and blank lines interleaved
    ("flowchart TD\n%% pipeline\nA[Stage]\n\n%% done\n", g([("A", "Stage", R)])),
    ("flowchart TD\nA --> B\n%% A --> C should be ignored\n", g([("A", "A", N), ("B", "B", N)], [("A", "B", SOLID)])),
    ("flowchart TD\n   %% indented comment\nA\n", g([("A", "A", N)])),
    # subgraphs
    (
        "flowchart TD\nsubgraph Enc\nA[Conv]\nend\nA --> B\n",
        g([("A", "Conv", R), ("B", "B", N)], [("A", "B", SOLID)], [("Enc", ["A"])]),
    ),
    (
        "flowchart TD\nsubgraph Encoder Stack\nA[Conv]\nB[Norm]\nend\n",
        g([("A", "Conv", R), ("B", "Norm", R)], subs=[("Encoder Stack", ["A", "B"])]),
    ),
    (
        "flowchart TD\nsubgraph Stage One\nA\nend\nsubgraph Stage Two\nB\nend\nA --> B\n",
        g([("A", "A", N), ("B", "B", N)], [("A", "B", SOLID)], [("Stage One", ["A"]), ("Stage Two", ["B"])]),
    ),
    (
        "flowchart TD\nsubgraph Core\nA --> B\nend\n",
        g([("A", "A", N), ("B", "B", N)], [("A", "B", SOLID)], [("Core", ["A", "B"])]),
    ),
    (
        "flowchart TD\nC[Pre]\nsubgraph Core\nA[Mid] --> B\nend\nC --> A\n",
        g(
            [("A", "Mid", R), ("B", "B", N), ("C", "Pre", R)],
            [("A", "B", SOLID), ("C", "A", SOLID)],
            [("Core", ["A", "B"])],
        ),
    ),
    (
        "flowchart TD\nA[Outside]\nsubgraph Inner\nA --> B[Member]\nend\n",
        # A was declared outside first, so only B belongs to the subgraph
        g([("A", "Outside", R), ("B", "Member", R)], [("A", "B", SOLID)], [("Inner", ["B"])]),
    ),
    (
        "flowchart LR\nsubgraph Perception\nS[Shapes]\nT[Texts]\nend\nS -.-> F[Fusion]\nT --> F\n",
        g(
            [("F", "Fusion", R), ("S", "Shapes", R), ("T", "Texts", R)],
            [("S", "F", DASH), ("T", "F", SOLID)],
            [("Perception", ["S", "T"])],
            flow="LR",
        ),
    ),
    ("flowchart TD\nsubgraph Empty Region\nend\n", g(subs=[("Empty Region", [])])),
    # larger assemblies
    (
        "flowchart TD\nA[Input] --> B{Route}\nB --> C(Fast Path)\nB --> D(Slow Path)\nC --> E[Join]\nD --> E\n",
        g(
            [("A", "Input", R), ("B", "Route", D), ("C", "Fast Path", O), ("D", "Slow Path", O), ("E", "Join", R)],
            [("A", "B", SOLID), ("B", "C", SOLID), ("B", "D", SOLID), ("C", "E", SOLID), ("D", "E", SOLID)],
        ),
    ),
    (
        "flowchart TD\nloss[Loss] -.-> opt[Optimizer]\nopt --> model[Model]\nmodel --> loss\n",
        g(
            [("loss", "Loss", R), ("model", "Model", R), ("opt", "Optimizer", R)],
            [("loss", "opt", DASH), ("model", "loss", SOLID), ("opt", "model", SOLID)],
        ),
    ),
    (
        "flowchart LR\nq[Query] --> attn{Attention}\nk[Key] --> attn\nv[Value] --> attn\nattn --> o[Output]\n",
        g(
            [("attn", "Attention", D), ("k", "Key", R), ("o", "Output", R), ("q", "Query", R), ("v", "Value", R)],
            [("attn", "o", SOLID), ("k", "attn", SOLID), ("q", "attn", SOLID), ("v", "attn", SOLID)],
            flow="LR",
        ),
    ),
    (
        "flowchart TD\nsubgraph Losses\nl1[CE Loss]\nl2[KL Loss]\nend\nl1 -.-> total[Total]\nl2 -.-> total\n",
        g(
            [("l1", "CE Loss", R), ("l2", "KL Loss", R), ("total", "Total", R)],
            [("l1", "total", DASH), ("l2", "total", DASH)],
            [("Losses", ["l1", "l2"])],
        ),
    ),
    (
        "flowchart TD\na1[Patch Embed] --> a2[Block 1]\na2 --> a3[Block 2]\na3 --> a4[Pool Head]\n",
        g(
            [("a1", "Patch Embed", R), ("a2", "Block 1", R), ("a3", "Block 2", R), ("a4", "Pool Head", R)],
            [("a1", "a2", SOLID), ("a2", "a3", SOLID), ("a3", "a4", SOLID)],
        ),
    ),
    (
        "flowchart TD\nenc(Latent) --> dec{Decode}\ndec -.-> enc\n",
        g([("dec", "Decode", D), ("enc", "Latent", O)], [("dec", "enc", DASH), ("enc", "dec", SOLID)]),
    ),
    (
        "flowchart TD\nsubgraph Readout\nr1(Probe A)\nr2(Probe B)\nend\nsrc[Stream] --> r1\nsrc --> r2\n",
        g(
            [("r1", "Probe A", O), ("r2", "Probe B", O), ("src", "Stream", R)],
            [("src", "r1", SOLID), ("src", "r2", SOLID)],
            [("Readout", ["r1", "r2"])],
        ),
    ),
    (
        "flowchart LR\nplanner[Planner] --> coder[Coder]\ncoder --> checker{Check}\nchecker -.-> planner\nchecker --> done[Done]\n",
        g(
            [("checker", "Check", D), ("coder", "Coder", R), ("done", "Done", R), ("planner", "Planner", R)],
            [("checker", "done", SOLID), ("checker", "planner", DASH), ("coder", "checker", SOLID), ("planner", "coder", SOLID)],
            flow="LR",
        ),
    ),
    (
        "flowchart TD\nx[Raw Image] --> seg[Segmenter]\nx --> ocr[Reader]\nseg --> fuse[Fuser]\nocr --> fuse\nfuse --> graph[Builder]\n",
        g(
            [("fuse", "Fuser", R), ("graph", "Builder", R), ("ocr", "Reader", R), ("seg", "Segmenter", R), ("x", "Raw Image", R)],
            [("fuse", "graph", SOLID), ("ocr", "fuse", SOLID), ("seg", "fuse", SOLID), ("x", "ocr", SOLID), ("x", "seg", SOLID)],
        ),
    ),
    ("flowchart TD\nA[A] --> B\n", g([("A", "A", R), ("B", "B", N)], [("A", "B", SOLID)])),
    ("flowchart TD\nlong_identifier_name[Short]\n", g([("long_identifier_name", "Short", R)])),
    ("flowchart TD\nA[punct: commas, colons; quotes ok]\n", g([("A", "punct: commas, colons; quotes ok", R)])),
    ("flowchart TD\nA[1024 x 768]\n", g([("A", "1024 x 768", R)])),
    ("flowchart TD\nA[Multi-Head Attention] --> B[Add-Norm]\n", g([("A", "Multi-Head Attention", R), ("B", "Add-Norm", R)], [("A", "B", SOLID)])),
    ("flowchart TD\nA[maps x --> y]\n", g([("A", "maps x --> y", R)])),
]


# (text, expected line number, message fragment)
NEGATIVE = [
    ("", 1, "missing flowchart header"),
    ("A --> B\n", 1, "header"),
    ("flowchart XY\nA\n", 1, "header"),
    ("graph TD\nA --> B\n", 1, "unsupported construct"),
    ("flowchart TD\nflowchart TD\n", 2, "unexpected"),
    ("flowchart TD\nA[Enc\n", 2, "unterminated"),
    ("flowchart TD\nA[Enc] extra\n", 2, "unexpected text"),
    ("flowchart TD\nA[One][Two]\n", 2, "unexpected text"),
    ("flowchart TD\nA[Enc]\nA[Enc]\n", 3, "duplicate node id"),
    ("flowchart TD\nA --> B --> C\n", 2, "edge chaining"),
    ("flowchart TD\nA ==> B\n", 2, "arrow"),
    ("flowchart TD\nA --- B\n", 2, "arrow"),
    ("flowchart TD\nA --o B\n", 2, "arrow"),
    ("flowchart TD\nA --x B\n", 2, "arrow"),
    ("flowchart TD\nA <--> B\n", 2, "arrow"),
    ("flowchart TD\nA -.- B\n", 2, "arrow"),
    ("flowchart TD\nA -->|label| B\n", 2, "invalid node id"),
    ("flowchart TD\nsubgraph One\nsubgraph Two\nend\nend\n", 3, "nested subgraph"),
    ("flowchart TD\nend\n", 2, "without an open subgraph"),
    ("flowchart TD\nsubgraph One\nA\n", 4, "missing 'end'"),
    ("flowchart TD\nsubgraph\nend\n", 2, "requires a label"),
    ("flowchart TD\nclassDef default fill:#f9f\n", 2, "unsupported construct"),
    ("flowchart TD\nstyle A fill:#f9f\n", 2, "unsupported construct"),
    ("flowchart TD\nclick A callback\n", 2, "unsupported construct"),
    ("flowchart TD\nlinkStyle 0 stroke:red\n", 2, "unsupported construct"),
    ("flowchart TD\ndirection LR\n", 2, "unsupported construct"),
    ("flowchart TD\n9lives[Cat]\n", 2, "invalid node id"),
    ("flowchart TD\n--> B\n", 2, "expected a node reference"),
    ("flowchart TD\nA -->\n", 2, "expected a node reference"),
]
