"""Batch evaluation harness, corpus statistics, and service launcher.

Runs are manifest-driven so ablations and provider swaps are explicit,
diffable configuration. Reports embed the full config fingerprint and are
byte-identical across runs with identical inputs. Items that fail to load
or whose providers fail are surfaced as unevaluated, never imputed as zero.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .docio import read_document, write_document
from .errors import ConfigError, ContractViolation, DocumentParseError, SciflowError
from .graph import (
    DiagramGraph,
    Difficulty,
    DifficultyConfig,
    difficulty_level,
    graph_stats,
    parse_graph_document,
)
from .matching import MatchResult, match_graphs
from .metrics import (
    DEFAULT_WEIGHTS,
    ScoreWeights,
    StructuredPrompt,
    coverage,
    faithfulness,
    filtered_node_labels,
    image_score,
    overall_score,
    parse_prompt_document,
    text_score,
)
from .pipeline import Agent, PipelineConfig, PipelineError, load_figure_bundle, run_round_trip
from .providers import (
    ConstantImageText,
    ConstantJudge,
    IdentityPerceptual,
    ProviderError,
    RemoteConfig,
    RemoteEmbeddingProvider,
    RemoteImageTextProvider,
    RemoteJudgeProvider,
    RemotePerceptualProvider,
    TrigramEmbedder,
)

MANIFEST_SCHEMA_VERSION = "sciflow-manifest/1"
REPORT_SCHEMA_VERSION = "sciflow-report/1"
STATS_SCHEMA_VERSION = "sciflow-stats/1"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


# --- configuration -----------------------------------------------------------


def _remote_config(doc: dict[str, Any]) -> RemoteConfig:
    if "endpoint" not in doc:
        raise ConfigError("remote provider needs an 'endpoint'")
    return RemoteConfig(
        endpoint=str(doc["endpoint"]),
        auth_env=doc.get("auth_env"),
        timeout_ms=int(doc.get("timeout_ms", 10_000)),
        retries=int(doc.get("retries", 2)),
    )


def _build_embedder(doc: dict[str, Any] | None):
    doc = doc or {"kind": "trigram"}
    kind = doc.get("kind", "trigram")
    if kind == "trigram":
        return TrigramEmbedder(dim=int(doc.get("dim", 512)))
    if kind == "remote":
        return RemoteEmbeddingProvider(_remote_config(doc))
    raise ConfigError(f"unknown embedder kind {kind!r}")


def _build_judge(doc: dict[str, Any] | None):
    if doc is None:
        return None
    kind = doc.get("kind")
    if kind == "constant":
        return ConstantJudge(float(doc.get("value", 0.5)))
    if kind == "remote":
        return RemoteJudgeProvider(_remote_config(doc))
    raise ConfigError(f"unknown judge kind {kind!r}")


def _build_image_text(doc: dict[str, Any] | None):
    if doc is None:
        return None
    kind = doc.get("kind")
    if kind == "constant":
        return ConstantImageText(float(doc.get("value", 0.0)))
    if kind == "remote":
        return RemoteImageTextProvider(_remote_config(doc))
    raise ConfigError(f"unknown image_text kind {kind!r}")


def _build_perceptual(doc: dict[str, Any] | None):
    if doc is None:
        return None
    kind = doc.get("kind")
    if kind == "identity":
        return IdentityPerceptual(float(doc.get("mismatch_distance", 1.0)))
    if kind == "remote":
        return RemotePerceptualProvider(_remote_config(doc))
    raise ConfigError(f"unknown perceptual kind {kind!r}")


@dataclass(frozen=True)
class EvalConfig:
    embedder: Any
    judge: Any
    image_text: Any
    perceptual: Any
    node_threshold: float = 0.6
    text_threshold: float = 0.6
    allow_reachability: bool = True
    max_path_len: int = 4
    weights: ScoreWeights = DEFAULT_WEIGHTS
    difficulty: DifficultyConfig = DifficultyConfig()
    pipeline: PipelineConfig = PipelineConfig()
    workers: int = 4
    disabled_stages: tuple[str, ...] = ()

    def fingerprint(self) -> dict[str, Any]:
        return {
            "embedder_id": self.embedder.id if self.embedder else None,
            "judge_id": self.judge.id if self.judge else None,
            "image_text_id": self.image_text.id if self.image_text else None,
            "perceptual_id": self.perceptual.id if self.perceptual else None,
            "node_threshold": self.node_threshold,
            "text_threshold": self.text_threshold,
            "allow_reachability": self.allow_reachability,
            "max_path_len": self.max_path_len,
            "weights": self.weights.as_document(),
            "difficulty": {
                "easy_max_nodes": self.difficulty.easy_max_nodes,
                "hard_min_nodes": self.difficulty.hard_min_nodes,
                "hard_branching": self.difficulty.hard_branching,
            },
            "fusion_iou_threshold": self.pipeline.iou_threshold,
            "grounding_radius": self.pipeline.grounding_radius,
            "disabled_stages": sorted(self.disabled_stages),
        }


def load_eval_config(doc: dict[str, Any], extra_disabled: tuple[str, ...] = ()) -> EvalConfig:
    weights_doc = doc.get("weights")
    weights = ScoreWeights(**weights_doc) if weights_doc else DEFAULT_WEIGHTS
    difficulty_doc = doc.get("difficulty") or {}
    difficulty = DifficultyConfig(
        easy_max_nodes=int(difficulty_doc.get("easy_max_nodes", 8)),
        hard_min_nodes=int(difficulty_doc.get("hard_min_nodes", 18)),
        hard_branching=float(difficulty_doc.get("hard_branching", 1.5)),
    )
    disabled = tuple(doc.get("disable_stages", [])) + tuple(extra_disabled)
    valid_stages = {a.value for a in Agent}
    for stage in disabled:
        if stage not in valid_stages:
            raise ConfigError(f"unknown stage {stage!r}; valid stages: {sorted(valid_stages)}")
    pipeline_doc = doc.get("pipeline") or {}
    node_threshold = float(doc.get("node_threshold", 0.6))
    pipeline_config = PipelineConfig(
        enabled_stages=frozenset(a for a in Agent if a.value not in disabled),
        iou_threshold=float(pipeline_doc.get("iou_threshold", 0.5)),
        grounding_radius=float(pipeline_doc.get("grounding_radius", 0.1)),
        node_threshold=node_threshold,
    )
    return EvalConfig(
        embedder=_build_embedder(doc.get("embedder")),
        judge=_build_judge(doc.get("judge")),
        image_text=_build_image_text(doc.get("image_text")),
        perceptual=_build_perceptual(doc.get("perceptual")),
        node_threshold=node_threshold,
        text_threshold=float(doc.get("text_threshold", 0.6)),
        allow_reachability=bool(doc.get("allow_reachability", True)),
        max_path_len=int(doc.get("max_path_len", 4)),
        weights=weights,
        difficulty=difficulty,
        pipeline=pipeline_config,
        workers=int(doc.get("workers", 4)),
        disabled_stages=disabled,
    )


# --- manifest ------------------------------------------------------------------


@dataclass(frozen=True)
class EvalItem:
    item_id: str
    domain: str
    model: str
    canonical: Path | None
    predicted: Path | None
    bundle: Path | None
    prompt: Path | None
    image: Path | None
    reference_image: Path | None
    precomputed: dict[str, float] = field(default_factory=dict)
    difficulty: str | None = None


def load_manifest(path: str | Path) -> list[EvalItem]:
    manifest_path = Path(path)
    doc = read_document(manifest_path)
    version = doc.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ConfigError(f"manifest schema_version must be {MANIFEST_SCHEMA_VERSION!r}, found {version!r}")
    base = manifest_path.parent
    default_model = str(doc.get("model_id", "default"))

    def resolve(value: Any) -> Path | None:
        return (base / str(value)) if value else None

    items = []
    seen: set[str] = set()
    for i, item_doc in enumerate(doc.get("items", [])):
        item_id = str(item_doc.get("item_id", f"item-{i}"))
        if item_id in seen:
            raise ConfigError(f"duplicate item_id {item_id!r} in manifest")
        seen.add(item_id)
        items.append(
            EvalItem(
                item_id=item_id,
                domain=str(item_doc.get("domain", "unspecified")),
                model=str(item_doc.get("model", default_model)),
                canonical=resolve(item_doc.get("canonical")),
                predicted=resolve(item_doc.get("predicted")),
                bundle=resolve(item_doc.get("bundle")),
                prompt=resolve(item_doc.get("prompt")),
                image=resolve(item_doc.get("image")),
                reference_image=resolve(item_doc.get("reference_image")),
                precomputed={k: float(v) for k, v in (item_doc.get("precomputed") or {}).items()},
                difficulty=item_doc.get("difficulty"),
            )
        )
    items.sort(key=lambda item: item.item_id)
    return items


# --- per-item evaluation ---------------------------------------------------------


class ItemError(SciflowError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


def _match_document(result: MatchResult) -> dict[str, Any]:
    return {
        "node_precision": result.node_precision,
        "node_recall": result.node_recall,
        "node_f1": result.node_f1,
        "edge_precision": result.edge_precision,
        "edge_recall": result.edge_recall,
        "edge_f1": result.edge_f1,
        "graph_score": result.graph_score,
        "threshold": result.matching.threshold_used,
        "pairs": [[p.pred_id, p.ref_id, p.similarity] for p in result.matching.pairs],
        "verdicts": [
            {
                "edge": v.pred_edge_id,
                "verdict": v.verdict.value,
                "witness": list(v.witness_path) if v.witness_path else None,
            }
            for v in result.edge_verdicts
        ],
    }


def _load_graph(path: Path) -> DiagramGraph:
    try:
        return parse_graph_document(path.read_bytes())
    except OSError as exc:
        raise ItemError("LOAD_ERROR", f"{path}: {exc}") from exc
    except DocumentParseError as exc:
        raise ItemError("PARSE_ERROR", f"{path}: {exc}") from exc


def _read_bytes(path: Path, what: str) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise ItemError("LOAD_ERROR", f"{what} {path}: {exc}") from exc


def evaluate_item(item: EvalItem, config: EvalConfig) -> dict[str, Any]:
    """Produce the per-item report fragment; raises ItemError when the item
    cannot be evaluated under the given configuration."""
    pre = item.precomputed
    flags: list[str] = []

    canonical: DiagramGraph | None = None
    if item.canonical is not None:
        canonical = _load_graph(item.canonical)

    predicted: DiagramGraph | None = None
    if item.predicted is not None:
        predicted = _load_graph(item.predicted)
    elif item.bundle is not None:
        try:
            bundle = load_figure_bundle(item.bundle)
            predicted = run_round_trip(bundle, config.embedder, config.pipeline)
        except (PipelineError, DocumentParseError) as exc:
            raise ItemError("PIPELINE_ERROR", str(exc)) from exc

    prompt: StructuredPrompt | None = None
    prompt_text = ""
    if item.prompt is not None:
        prompt_doc = read_document(item.prompt)
        try:
            prompt = parse_prompt_document(prompt_doc)
        except (ConfigError, KeyError, TypeError, ValueError) as exc:
            raise ItemError("PARSE_ERROR", f"{item.prompt}: {exc}") from exc
        prompt_text = item.prompt.read_text(encoding="utf-8")

    # graph level
    match_doc = None
    if "s_graph" in pre:
        s_graph = pre["s_graph"]
        node_scores = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
        edge_scores = {"precision": 0.0, "recall": 0.0, "f1": 0.0}
        flags.append("precomputed_graph")
    else:
        if canonical is None or predicted is None:
            raise ItemError("MISSING_INPUT", "graph level needs canonical and predicted graphs (or precomputed s_graph)")
        result = match_graphs(
            predicted,
            canonical,
            config.embedder,
            threshold=config.node_threshold,
            allow_reachability=config.allow_reachability,
            max_path_len=config.max_path_len,
            node_weight=config.weights.graph_node,
            edge_weight=config.weights.graph_edge,
        )
        s_graph = result.graph_score
        node_scores = {"precision": result.node_precision, "recall": result.node_recall, "f1": result.node_f1}
        edge_scores = {"precision": result.edge_precision, "recall": result.edge_recall, "f1": result.edge_f1}
        match_doc = _match_document(result)

    # text level
    coverage_value = faithfulness_value = alignment_value = 0.0
    if "s_text" in pre:
        s_text = pre["s_text"]
        flags.append("precomputed_text")
    else:
        if predicted is None or prompt is None:
            raise ItemError("MISSING_INPUT", "text level needs a predicted graph and prompt (or precomputed s_text)")
        coverage_value = coverage(predicted, prompt, config.embedder, config.text_threshold)
        faithfulness_value = faithfulness(predicted, prompt, config.embedder, config.text_threshold)
        if not prompt.components:
            flags.append("vacuous_coverage")
        if not filtered_node_labels(predicted):
            flags.append("vacuous_faithfulness")
        if "alignment" in pre:
            alignment_value = pre["alignment"]
        elif config.judge is not None:
            from .graph import serialize_graph

            alignment_value = config.judge.alignment(serialize_graph(predicted).decode("utf-8"), prompt_text)
        else:
            raise ItemError("MISSING_INPUT", "text level needs a judge provider or precomputed alignment")
        s_text = text_score(coverage_value, faithfulness_value, alignment_value, config.weights)

    # image level
    semantic_value = flow_value = 0.0
    perceptual_distance = 0.0
    if "s_image" in pre:
        s_image = pre["s_image"]
        flags.append("precomputed_image")
        perceptual_value = 0.0
    else:
        image_bytes = _read_bytes(item.image, "image") if item.image is not None else None
        if "semantic" in pre:
            semantic_value = pre["semantic"]
        elif config.image_text is not None and image_bytes is not None:
            cos = config.image_text.similarity(image_bytes, prompt_text)
            semantic_value = min(1.0, max(0.0, (cos + 1.0) / 2.0))
        else:
            raise ItemError("MISSING_INPUT", "image level needs an image and image_text provider (or precomputed semantic)")
        if "flow" in pre:
            flow_value = pre["flow"]
        elif config.judge is not None and image_bytes is not None:
            flow_value = config.judge.flow(image_bytes, prompt_text)
        else:
            raise ItemError("MISSING_INPUT", "image level needs an image and judge provider (or precomputed flow)")
        if "perceptual_distance" in pre:
            perceptual_distance = pre["perceptual_distance"]
        elif config.perceptual is not None and image_bytes is not None and item.reference_image is not None:
            perceptual_distance = config.perceptual.distance(
                image_bytes, _read_bytes(item.reference_image, "reference image")
            )
        else:
            raise ItemError(
                "MISSING_INPUT",
                "image level needs generated and reference images with a perceptual provider (or precomputed perceptual_distance)",
            )
        perceptual_value = 1.0 - min(perceptual_distance, 1.0)
        s_image = image_score(semantic_value, flow_value, perceptual_distance, config.weights)

    s_overall = overall_score(s_graph, s_text, s_image, config.weights)

    if item.difficulty is not None:
        difficulty = item.difficulty
    elif canonical is not None:
        difficulty = difficulty_level(graph_stats(canonical), config.difficulty).value
    else:
        raise ItemError("MISSING_INPUT", "difficulty needs a canonical graph or an explicit difficulty tag")

    return {
        "item_id": item.item_id,
        "domain": item.domain,
        "model": item.model,
        "difficulty": difficulty,
        "scores": {
            "s_graph": s_graph,
            "s_text": s_text,
            "s_image": s_image,
            "s_overall": s_overall,
            "node": node_scores,
            "edge": edge_scores,
            "coverage": coverage_value,
            "faithfulness": faithfulness_value,
            "alignment": alignment_value,
            "semantic": semantic_value,
            "flow": flow_value,
            "perceptual": perceptual_value,
        },
        "match": match_doc,
        "flags": sorted(flags),
        "error": None,
    }


# --- aggregation -----------------------------------------------------------------


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def build_leaderboard(item_docs: list[dict[str, Any]]) -> list[dict[str, Any]]:
    """Sample-weighted aggregation: bin means weighted by bin counts, which
    equals the plain mean over all evaluated items."""
    by_model: dict[str, list[dict[str, Any]]] = {}
    failed_by_model: dict[str, int] = {}
    for doc in item_docs:
        model = doc["model"]
        if doc["error"] is None:
            by_model.setdefault(model, []).append(doc)
        else:
            failed_by_model[model] = failed_by_model.get(model, 0) + 1
            by_model.setdefault(model, by_model.get(model, []))

    rows = []
    for model in sorted(by_model):
        docs = by_model[model]
        bins = {level.value: [] for level in Difficulty}
        for doc in docs:
            bins[doc["difficulty"]].append(doc["scores"]["s_graph"])
        all_graph = [doc["scores"]["s_graph"] for doc in docs]
        rows.append(
            {
                "model": model,
                "s_graph": {
                    "easy": _mean(bins["Easy"]),
                    "medium": _mean(bins["Medium"]),
                    "hard": _mean(bins["Hard"]),
                    "avg": _mean(all_graph),
                },
                "bin_counts": {
                    "easy": len(bins["Easy"]),
                    "medium": len(bins["Medium"]),
                    "hard": len(bins["Hard"]),
                },
                "s_text_avg": _mean([doc["scores"]["s_text"] for doc in docs]),
                "s_image_avg": _mean([doc["scores"]["s_image"] for doc in docs]),
                "s_overall_avg": _mean([doc["scores"]["s_overall"] for doc in docs]),
                "evaluated": len(docs),
                "unevaluated": failed_by_model.get(model, 0),
            }
        )
    return rows


def evaluate_manifest(manifest_path: str | Path, config: EvalConfig) -> dict[str, Any]:
    items = load_manifest(manifest_path)

    def run_one(item: EvalItem) -> dict[str, Any]:
        try:
            return evaluate_item(item, config)
        except ItemError as exc:
            return _failed_item(item, exc.code, str(exc))
        except ProviderError as exc:
            return _failed_item(item, "PROVIDER_ERROR", str(exc))
        except (ConfigError, ContractViolation, DocumentParseError) as exc:
            # item-scoped data problems stay itemized; they never kill the run
            return _failed_item(item, "ITEM_ERROR", str(exc))

    if config.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run_one, items))
    else:
        results = [run_one(item) for item in items]
    results.sort(key=lambda doc: doc["item_id"])

    evaluated = [doc for doc in results if doc["error"] is None]
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": config.fingerprint(),
        "item_count": len(results),
        "evaluated_count": len(evaluated),
        "unevaluated_count": len(results) - len(evaluated),
        "items": results,
        "leaderboard": build_leaderboard(results),
    }


def _failed_item(item: EvalItem, code: str, message: str) -> dict[str, Any]:
    return {
        "item_id": item.item_id,
        "domain": item.domain,
        "model": item.model,
        "difficulty": None,
        "scores": None,
        "match": None,
        "flags": [],
        "error": {"code": code, "message": message},
    }


# --- stats -------------------------------------------------------------------------


def corpus_stats(graphs_dir: str | Path, difficulty: DifficultyConfig = DifficultyConfig()) -> dict[str, Any]:
    root = Path(graphs_dir)
    if not root.is_dir():
        raise ConfigError(f"{root} is not a directory")
    node_hist: dict[int, int] = {}
    edge_hist: dict[int, int] = {}
    bins = {level.value: 0 for level in Difficulty}
    non_linear = 0
    count = 0
    errors = []
    for path in sorted(root.glob("*.json")):
        try:
            g = parse_graph_document(path.read_bytes())
        except (DocumentParseError, OSError) as exc:
            errors.append({"file": path.name, "message": str(exc)})
            continue
        stats = graph_stats(g)
        count += 1
        node_hist[stats.node_count] = node_hist.get(stats.node_count, 0) + 1
        edge_hist[stats.edge_count] = edge_hist.get(stats.edge_count, 0) + 1
        bins[difficulty_level(stats, difficulty).value] += 1
        if not stats.is_linear:
            non_linear += 1
    return {
        "schema_version": STATS_SCHEMA_VERSION,
        "graph_count": count,
        "node_histogram": {str(k): node_hist[k] for k in sorted(node_hist)},
        "edge_histogram": {str(k): edge_hist[k] for k in sorted(edge_hist)},
        "difficulty_bins": bins,
        "non_linear_fraction": (non_linear / count) if count else 0.0,
        "errors": errors,
    }


# --- entry point ----------------------------------------------------------------


def _cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        config_doc = read_document(args.config) if args.config else {}
        config = load_eval_config(config_doc, tuple(args.disable_stage or ()))
    except (ConfigError, DocumentParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = evaluate_manifest(args.manifest, config)
    except (ConfigError, DocumentParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_document(args.out, report)
    evaluated = report["evaluated_count"]
    print(f"evaluated {evaluated}/{report['item_count']} items -> {args.out}")
    for doc in report["items"]:
        if doc["error"] is not None:
            print(f"  unevaluated {doc['item_id']}: [{doc['error']['code']}] {doc['error']['message']}", file=sys.stderr)
    return EXIT_OK if evaluated > 0 else EXIT_FAILURE


def _cmd_stats(args: argparse.Namespace) -> int:
    try:
        document = corpus_stats(args.dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_document(args.out, document)
    print(f"{document['graph_count']} graphs -> {args.out}")
    return EXIT_OK if document["graph_count"] > 0 or not document["errors"] else EXIT_FAILURE


def _cmd_serve(args: argparse.Namespace) -> int:
    from .service import serve

    try:
        serve(args.data, args.port, host=args.host, auth_token=args.token)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"server error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sciflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="run the batch evaluation harness")
    p_eval.add_argument("--manifest", required=True, help="manifest document listing items")
    p_eval.add_argument("--config", help="evaluation config document")
    p_eval.add_argument("--out", required=True, help="report output path")
    p_eval.add_argument(
        "--disable-stage",
        action="append",
        metavar="NAME",
        help="disable a pipeline stage (repeatable): environment_curator, shape_hunter, text_spotter",
    )
    p_eval.set_defaults(func=_cmd_evaluate)

    p_stats = sub.add_parser("stats", help="corpus statistics over a directory of graph documents")
    p_stats.add_argument("--dir", required=True)
    p_stats.add_argument("--out", required=True)
    p_stats.set_defaults(func=_cmd_stats)

    p_serve = sub.add_parser("serve", help="run the annotation service")
    p_serve.add_argument("--data", required=True, help="data root with one directory per item")
    p_serve.add_argument("--port", type=int, default=8400)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--token", help="static bearer token required on every request")
    p_serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
