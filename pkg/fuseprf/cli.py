"""
Command-line entry point.

    fuseprf index {sparse,impact,dense}   build and persist an index
    fuseprf run                           run a pipeline over a query set
    fuseprf eval                          evaluate (and compare) run files
    fuseprf sweep                         run + eval over one swept parameter
    fuseprf conditions                    the six baseline/placement conditions
    fuseprf serve                         HTTP search service
    fuseprf gen-fixture                   write a desk-scale test collection

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage or
configuration error.
"""

import functools
import logging
import os
import shutil
from typing import Any, Dict, List, Optional, Sequence, Tuple

import click
from dotenv import load_dotenv
from pydantic import ValidationError

from . import __version__
from .config import (
    build_pipeline_config,
    data_default,
    deep_merge,
    load_config_file,
    resolve_data_path,
)
from .corpus_io import (
    ensure_parent,
    load_corpus,
    load_qrels,
    load_queries,
    load_run,
    load_term_weights,
    load_vectors,
    write_run,
)
from .dense_store import DenseStore
from .errors import ConfigError, FuseprfError
from .eval import (
    DEFAULT_METRICS,
    compare_reports,
    evaluate_run,
    format_comparisons,
    format_table,
    parse_metrics,
    report_records,
    write_report,
)
from .fixtures import generate_synthetic, generate_tiny
from .pipeline import HybridPipeline, RetrievalIndexes, load_indexes
from .retrievers.providers.bm25 import build_index
from .retrievers.providers.impact import build_impact_index
from .schemas import MetricReport, PipelineConfig, Qrels, Query, SweepSpec

logger = logging.getLogger("fuseprf_logger")

_handler: Optional[logging.Handler] = None

# condition name -> overrides applied over the base configuration
CONDITIONS: List[Tuple[str, Dict[str, Any]]] = [
    ("dense", {"stage": "none", "use_prf": False}),
    ("vprf", {"stage": "none", "use_prf": True}),
    ("fuse", {"stage": "fuse", "use_prf": False}),
    ("pre", {"stage": "pre", "use_prf": True}),
    ("post", {"stage": "post", "use_prf": True}),
    ("both", {"stage": "both", "use_prf": True}),
]
COMPARISONS = [("pre", "post"), ("pre", "fuse"), ("post", "fuse"), ("both", "fuse")]


class UsageFailure(click.ClickException):
    exit_code = 2


class RuntimeFailure(click.ClickException):
    exit_code = 1


def _configure_logging(verbose: bool) -> None:
    global _handler
    if _handler is not None:
        logger.removeHandler(_handler)
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
    logger.addHandler(_handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def handle_errors(func):
    """Map library exceptions onto exit statuses 2 (usage/config) and 1 (runtime)."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ConfigError, FileNotFoundError, IsADirectoryError) as e:
            logger.error(f"{type(e).__name__}: {str(e)}")
            raise UsageFailure(str(e)) from e
        except (FuseprfError, OSError) as e:
            logger.error(f"{type(e).__name__}: {str(e)}")
            raise RuntimeFailure(str(e)) from e
        except ValueError as e:
            logger.error(f"{type(e).__name__}: {str(e)}")
            raise UsageFailure(str(e)) from e

    return wrapper


def _compose(*decorators):
    def apply(func):
        for decorator in reversed(decorators):
            func = decorator(func)
        return func

    return apply


pipeline_options = _compose(
    click.option("--stage", type=click.Choice(["none", "fuse", "pre", "post", "both"]), default=None,
                 help="Interpolation placement."),
    click.option("--prf", type=click.Choice(["on", "off"]), default=None,
                 help="Vector PRF; defaults to on for pre/post/both."),
    click.option("--dense", type=click.Choice(["on", "off"]), default=None,
                 help="Dense retrieval; off gives the sparse-only run."),
    click.option("--lambda", "lambda_", type=float, default=None, help="Sparse weight in [0, 1]."),
    click.option("--norm", type=click.Choice(["none", "minmax"]), default=None,
                 help="Score normalisation before interpolation."),
    click.option("--missing", type=click.Choice(["min", "skip"]), default=None,
                 help="Scoring of passages found by one retriever only."),
    click.option("--output-depth", type=int, default=None, help="Length of fused lists."),
    click.option("--alpha", type=float, default=None, help="Original query weight."),
    click.option("--beta", type=float, default=None, help="Feedback weight."),
    click.option("--prf-depth", type=int, default=None, help="Number of feedback passages."),
    click.option("--aggregation", type=click.Choice(["mean", "sum"]), default=None,
                 help="Feedback vector aggregation."),
    click.option("--depth", type=int, default=None, help="Retrieval depth of every round."),
    click.option("--k1", type=float, default=None, help="BM25 k1."),
    click.option("--b", type=float, default=None, help="BM25 b."),
    click.option("--sparse", type=click.Choice(["bm25", "impact"]), default=None,
                 help="Sparse backend."),
)

index_options = _compose(
    click.option("--sparse-index", default=None, help="Sparse index directory."),
    click.option("--dense-store", default=None, help="Dense store snapshot."),
    click.option("--query-weights", default=None, help="Encoded impact query weights (JSON lines)."),
    click.option("--similarity", type=click.Choice(["ip", "cosine"]), default="ip",
                 help="Dense similarity."),
)

query_options = _compose(
    click.option("--queries", default=None, help="Query TSV file."),
    click.option("--qvecs", default=None, help="Query vector file (text format)."),
    click.option("--threads", type=int, default=None, help="Worker threads; defaults to all cores."),
)


def _overrides(options: Dict[str, Any]) -> Dict[str, Any]:
    """Translate pipeline flags into a partial PipelineConfig dict; unset flags are None."""
    stage = options.get("stage")
    use_prf = None if options.get("prf") is None else options["prf"] == "on"
    if use_prf is None and stage is not None:
        use_prf = stage in ("pre", "post", "both")
    return {
        "stage": stage,
        "use_prf": use_prf,
        "use_dense": None if options.get("dense") is None else options["dense"] == "on",
        "retrieval_depth": options.get("depth"),
        "sparse_backend": options.get("sparse"),
        "fusion": {
            "lambda": options.get("lambda_"),
            "normalization": options.get("norm"),
            "missing_policy": options.get("missing"),
            "output_depth": options.get("output_depth"),
        },
        "prf": {
            "alpha": options.get("alpha"),
            "beta": options.get("beta"),
            "depth_k": options.get("prf_depth"),
            "aggregation": options.get("aggregation"),
        },
        "bm25": {"k1": options.get("k1"), "b": options.get("b")},
    }


def _data_path(ctx: click.Context, value: Optional[str], key: str) -> Optional[str]:
    """Flag value, else the config file's [data] entry, resolved against the data dir."""
    return resolve_data_path(value or data_default(ctx.obj["file_config"], key))


def _require(value: Optional[str], flag: str) -> str:
    if not value:
        raise UsageFailure(f"{flag} is required")
    return value


def _check_output(path: str, force: bool) -> None:
    if not os.path.exists(path):
        return
    if not force:
        raise UsageFailure(f"{path} already exists; pass --force to overwrite")
    if os.path.isdir(path):
        shutil.rmtree(path)
    else:
        os.remove(path)


def _load_indexes(ctx: click.Context, sparse_index, dense_store, query_weights, similarity, config):
    return load_indexes(
        dense_store=_data_path(ctx, dense_store, "dense_store"),
        sparse_index=_data_path(ctx, sparse_index, "sparse_index"),
        sparse_backend=config.sparse_backend,
        query_weights=_data_path(ctx, query_weights, "query_weights"),
        similarity=similarity,
    )


def _load_queries(ctx: click.Context, queries, qvecs, indexes: RetrievalIndexes, config: PipelineConfig):
    query_list = load_queries(_require(_data_path(ctx, queries, "queries"), "--queries"))
    vectors = {}
    if config.use_dense and indexes.dense is not None:
        vectors = load_vectors(_require(_data_path(ctx, qvecs, "qvecs"), "--qvecs"), indexes.dense.dim)
    return query_list, vectors


def _run_and_evaluate(
    indexes: RetrievalIndexes,
    config: PipelineConfig,
    queries: Sequence[Query],
    vectors,
    threads: Optional[int],
    run_path: str,
    qrels: Qrels,
    metrics,
    gain: str,
) -> List[MetricReport]:
    pipeline = HybridPipeline(indexes, config)
    entries = pipeline.run_batch(queries, vectors, threads)
    write_run(entries, run_path)
    return evaluate_run(entries, qrels, metrics, gain)


@click.group()
@click.version_option(__version__, prog_name="fuseprf")
@click.option("--config", "config_path", default=None, help="TOML configuration file.")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose (DEBUG) logging.")
@click.pass_context
@handle_errors
def main(ctx: click.Context, config_path: Optional[str], verbose: bool):
    """Hybrid sparse/dense retrieval with vector pseudo-relevance feedback."""
    load_dotenv()
    _configure_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["file_config"] = load_config_file(resolve_data_path(config_path))


@main.group()
def index():
    """Build and persist an index."""


@index.command("sparse")
@click.option("--corpus", default=None, help="Corpus JSON-lines file.")
@click.option("--out", required=True, help="Output index directory.")
@click.option("--force", is_flag=True, help="Replace an existing index.")
@click.pass_context
@handle_errors
def index_sparse(ctx: click.Context, corpus: Optional[str], out: str, force: bool):
    """BM25 inverted index over a corpus."""
    passages = load_corpus(_require(_data_path(ctx, corpus, "corpus"), "--corpus"))
    _check_output(out, force)
    built = build_index(passages)
    built.save(out)
    click.echo(
        f"{built.doc_count} documents, {len(built.postings)} terms, "
        f"avg length {built.avg_doc_len:.2f}"
    )


@index.command("impact")
@click.option("--weights", default=None, help="Passage term weights (JSON lines).")
@click.option("--out", required=True, help="Output index directory.")
@click.option("--force", is_flag=True, help="Replace an existing index.")
@click.pass_context
@handle_errors
def index_impact(ctx: click.Context, weights: Optional[str], out: str, force: bool):
    """Learned-impact index over precomputed passage term weights."""
    docs = load_term_weights(_require(_data_path(ctx, weights, "passage_weights"), "--weights"))
    _check_output(out, force)
    built = build_impact_index(docs.values())
    built.save(out)
    click.echo(f"{built.doc_count} documents, {len(built.postings)} terms")


@index.command("dense")
@click.option("--vectors", default=None, help="Passage vector file.")
@click.option("--dim", type=click.IntRange(min=1), required=True, help="Vector dimension.")
@click.option("--binary", is_flag=True, help="Read the binary vector format.")
@click.option("--out", required=True, help="Output snapshot file.")
@click.option("--force", is_flag=True, help="Replace an existing snapshot.")
@click.pass_context
@handle_errors
def index_dense(
    ctx: click.Context, vectors: Optional[str], dim: int, binary: bool, out: str, force: bool
):
    """Dense store snapshot over passage vectors."""
    path = _require(_data_path(ctx, vectors, "passage_vectors"), "--vectors")
    store = DenseStore.from_vector_file(path, dim, binary=binary)
    _check_output(out, force)
    ensure_parent(out)
    store.save(out)
    click.echo(f"{len(store)} documents, dimension {store.dim}")


@main.command()
@pipeline_options
@index_options
@query_options
@click.option("--out", required=True, help="Output run file.")
@click.pass_context
@handle_errors
def run(
    ctx: click.Context,
    sparse_index,
    dense_store,
    query_weights,
    similarity,
    queries,
    qvecs,
    threads,
    out,
    **options,
):
    """Run one pipeline configuration over a query set."""
    config = build_pipeline_config(ctx.obj["file_config"], _overrides(options))
    indexes = _load_indexes(ctx, sparse_index, dense_store, query_weights, similarity, config)
    query_list, vectors = _load_queries(ctx, queries, qvecs, indexes, config)
    entries = HybridPipeline(indexes, config).run_batch(query_list, vectors, threads)
    ensure_parent(out)
    write_run(entries, out)
    click.echo(f"{len(entries)} entries for {len(query_list)} queries, tag {config.tag()}")


@main.command("eval")
@click.option("--run", "run_path", required=True, help="Run file to evaluate.")
@click.option("--qrels", default=None, help="Qrels file.")
@click.option("--metrics", default=DEFAULT_METRICS, show_default=True, help="Comma-separated metrics.")
@click.option("--compare", "compare_path", default=None, help="Second run for a paired t-test.")
@click.option("--gain", type=click.Choice(["linear", "exp"]), default="linear", help="nDCG gain.")
@click.option("--report", "report_path", default=None, help="JSON-lines report output.")
@click.pass_context
@handle_errors
def evaluate(ctx, run_path, qrels, metrics, compare_path, gain, report_path):
    """Evaluate a run file; with --compare, test the difference for significance."""
    parsed = parse_metrics(metrics)
    judgments = load_qrels(_require(_data_path(ctx, qrels, "qrels"), "--qrels"))
    rows = [(os.path.basename(run_path), evaluate_run(load_run(run_path), judgments, parsed, gain))]
    significance = None
    if compare_path:
        rows.append(
            (os.path.basename(compare_path), evaluate_run(load_run(compare_path), judgments, parsed, gain))
        )
        significance = compare_reports(rows[0][1], rows[1][1])
    click.echo(format_table(rows, significance))
    if report_path:
        ensure_parent(report_path)
        write_report(report_path, [r for name, reports in rows for r in report_records(name, reports)])


@main.command()
@click.option("--parameter", type=click.Choice(["lambda", "alpha", "beta", "prf_depth"]), required=True)
@click.option("--values", "values_text", required=True, help="Comma-separated ascending values.")
@click.option("--qrels", default=None, help="Qrels file.")
@click.option("--metrics", default=DEFAULT_METRICS, show_default=True)
@click.option("--gain", type=click.Choice(["linear", "exp"]), default="linear")
@click.option("--out-dir", required=True, help="Directory for run files and the report.")
@pipeline_options
@index_options
@query_options
@click.pass_context
@handle_errors
def sweep(
    ctx,
    parameter,
    values_text,
    qrels,
    metrics,
    gain,
    out_dir,
    sparse_index,
    dense_store,
    query_weights,
    similarity,
    queries,
    qvecs,
    threads,
    **options,
):
    """Run and evaluate one configuration per value of a swept parameter."""
    try:
        values = [float(v) for v in values_text.split(",") if v.strip()]
        spec = SweepSpec(parameter=parameter, values=values)
    except (ValueError, ValidationError) as e:
        raise ConfigError(f"invalid sweep: {e}") from e
    base = build_pipeline_config(ctx.obj["file_config"], _overrides(options))
    configs = []
    for value in spec.values:
        try:
            configs.append((spec.label(value), spec.apply(base, value)))
        except ValidationError as e:
            raise ConfigError(f"sweep value {value} gives an invalid configuration: {e}") from e
    parsed = parse_metrics(metrics)
    judgments = load_qrels(_require(_data_path(ctx, qrels, "qrels"), "--qrels"))
    indexes = _load_indexes(ctx, sparse_index, dense_store, query_weights, similarity, base)
    query_list, vectors = _load_queries(ctx, queries, qvecs, indexes, base)
    os.makedirs(out_dir, exist_ok=True)

    rows: List[Tuple[str, List[MetricReport]]] = []
    try:
        for label, config in configs:
            run_path = os.path.join(out_dir, f"run.{label}.txt")
            reports = _run_and_evaluate(
                indexes, config, query_list, vectors, threads, run_path, judgments, parsed, gain
            )
            rows.append((label, reports))
    finally:
        write_report(
            os.path.join(out_dir, "sweep.jsonl"),
            [r for name, reports in rows for r in report_records(name, reports)],
        )
        if len(rows) < len(configs):
            logger.error(f"Sweep stopped after {len(rows)} of {len(configs)} values")
    click.echo(format_table(rows))


@main.command()
@click.option("--qrels", default=None, help="Qrels file.")
@click.option("--metrics", default=DEFAULT_METRICS, show_default=True)
@click.option("--gain", type=click.Choice(["linear", "exp"]), default="linear")
@click.option("--out-dir", required=True, help="Directory for run files and the report.")
@pipeline_options
@index_options
@query_options
@click.pass_context
@handle_errors
def conditions(
    ctx,
    qrels,
    metrics,
    gain,
    out_dir,
    sparse_index,
    dense_store,
    query_weights,
    similarity,
    queries,
    qvecs,
    threads,
    **options,
):
    """Dense, VPRF, No-PRF interpolation and the Pre/Post/Both placements side by side."""
    base = build_pipeline_config(ctx.obj["file_config"], _overrides(options))
    configs = []
    for name, condition in CONDITIONS:
        try:
            merged = deep_merge(base.prune(), dict(condition, use_dense=True))
            configs.append((name, PipelineConfig.model_validate(merged)))
        except ValidationError as e:
            raise ConfigError(f"condition '{name}' is invalid: {e}") from e
    parsed = parse_metrics(metrics)
    judgments = load_qrels(_require(_data_path(ctx, qrels, "qrels"), "--qrels"))
    indexes = _load_indexes(ctx, sparse_index, dense_store, query_weights, similarity, base)
    query_list, vectors = _load_queries(ctx, queries, qvecs, indexes, configs[0][1])
    os.makedirs(out_dir, exist_ok=True)

    results: Dict[str, List[MetricReport]] = {}
    for name, config in configs:
        run_path = os.path.join(out_dir, f"run.{name}.txt")
        results[name] = _run_and_evaluate(
            indexes, config, query_list, vectors, threads, run_path, judgments, parsed, gain
        )
    rows = list(results.items())
    write_report(
        os.path.join(out_dir, "conditions.jsonl"),
        [r for name, reports in rows for r in report_records(name, reports)],
    )
    comparisons = [
        (f"{left} vs {right}", compare_reports(results[left], results[right]))
        for left, right in COMPARISONS
    ]
    click.echo(format_table(rows))
    click.echo("")
    click.echo(format_comparisons(comparisons, [r.label for r in rows[0][1]]))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@pipeline_options
@index_options
@click.pass_context
@handle_errors
def serve(ctx, host, port, sparse_index, dense_store, query_weights, similarity, **options):
    """Serve POST /search and GET /healthz over the loaded indexes."""
    import uvicorn

    from .serve import create_app

    config = build_pipeline_config(ctx.obj["file_config"], _overrides(options))
    app = create_app(
        lambda: _load_indexes(ctx, sparse_index, dense_store, query_weights, similarity, config),
        config,
    )
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command("gen-fixture")
@click.option("--kind", type=click.Choice(["synthetic", "tiny"]), default="synthetic", show_default=True)
@click.option("--seed", type=int, default=13, show_default=True, help="Seed for the synthetic corpus.")
@click.option("--out", required=True, help="Output directory.")
@handle_errors
def gen_fixture(kind: str, seed: int, out: str):
    """Write a desk-scale collection: corpus, queries, qrels, vectors and term weights."""
    fixture = generate_synthetic(seed) if kind == "synthetic" else generate_tiny()
    fixture.write(out)
    click.echo(
        f"{len(fixture.passages)} passages, {len(fixture.queries)} queries, "
        f"dimension {fixture.dim} written to {out}"
    )


if __name__ == "__main__":
    main()
