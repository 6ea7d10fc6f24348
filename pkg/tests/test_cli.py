import json
import os

import pytest
from click.testing import CliRunner

from fuseprf.cli import main
from fuseprf.corpus_io import load_qrels, load_run
from fuseprf.eval import evaluate_run


def invoke(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    data = root / "data"
    assert invoke("gen-fixture", "--kind", "tiny", "--out", data).exit_code == 0
    assert invoke("index", "sparse", "--corpus", data / "corpus.jsonl", "--out", root / "bm25").exit_code == 0
    assert (
        invoke("index", "impact", "--weights", data / "passage_weights.jsonl", "--out", root / "impact").exit_code
        == 0
    )
    result = invoke(
        "index", "dense", "--vectors", data / "passage_vectors.txt", "--dim", 3, "--out", root / "dense.bin"
    )
    assert result.exit_code == 0, result.output
    return root


def data_args(root):
    return [
        "--sparse-index", root / "bm25",
        "--dense-store", root / "dense.bin",
        "--queries", root / "data" / "queries.tsv",
        "--qvecs", root / "data" / "query_vectors.txt",
    ]


def test_index_reports_document_count(workspace, tmp_path):
    result = invoke("index", "sparse", "--corpus", workspace / "data" / "corpus.jsonl", "--out", tmp_path / "idx")
    assert result.exit_code == 0
    assert "6 documents" in result.output


def test_index_refuses_to_overwrite(workspace):
    corpus = workspace / "data" / "corpus.jsonl"
    result = invoke("index", "sparse", "--corpus", corpus, "--out", workspace / "bm25")
    assert result.exit_code == 2
    assert "--force" in result.output
    result = invoke("index", "sparse", "--corpus", corpus, "--out", workspace / "bm25", "--force")
    assert result.exit_code == 0


def test_missing_input_is_a_usage_error(tmp_path):
    missing = tmp_path / "nope.jsonl"
    result = invoke("index", "sparse", "--corpus", missing, "--out", tmp_path / "idx")
    assert result.exit_code == 2
    assert str(missing) in result.output
    assert not (tmp_path / "idx").exists()


def test_dense_index_dimension_mismatch_is_a_runtime_error(workspace, tmp_path):
    result = invoke(
        "index", "dense", "--vectors", workspace / "data" / "passage_vectors.txt", "--dim", 4,
        "--out", tmp_path / "d.bin",
    )
    assert result.exit_code == 1


def test_run_is_deterministic_across_thread_counts(workspace, tmp_path):
    outputs = []
    for threads in (1, 4, 1):
        out = tmp_path / f"run{len(outputs)}.txt"
        result = invoke(
            "run", "--stage", "both", *data_args(workspace), "--threads", threads, "--out", out
        )
        assert result.exit_code == 0, result.output
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    entries = load_run(str(tmp_path / "run0.txt"))
    assert {e.query_id for e in entries} == {"q1", "q2"}
    assert entries[0].tag.startswith("fuseprf-both-bm25-")


def test_eval_reports_are_byte_identical(workspace, tmp_path):
    out = tmp_path / "run.txt"
    invoke("run", "--stage", "post", *data_args(workspace), "--out", out)
    reports = []
    for i in range(2):
        report = tmp_path / f"report{i}.jsonl"
        result = invoke("eval", "--run", out, "--qrels", workspace / "data" / "qrels.txt", "--report", report)
        assert result.exit_code == 0, result.output
        assert "ndcg@10" in result.output
        reports.append(report.read_bytes())
    assert reports[0] == reports[1]
    records = [json.loads(line) for line in reports[0].decode("utf-8").splitlines()]
    assert {r["metric"] for r in records} == {"map", "ndcg@10", "recall@1000"}


def test_eval_compare_prints_p_values(workspace, tmp_path):
    qrels = workspace / "data" / "qrels.txt"
    invoke("run", *data_args(workspace), "--out", tmp_path / "dense.txt")
    invoke("run", "--stage", "fuse", *data_args(workspace), "--out", tmp_path / "fuse.txt")
    result = invoke(
        "eval", "--run", tmp_path / "dense.txt", "--compare", tmp_path / "fuse.txt", "--qrels", qrels,
        "--metrics", "map,ndcg@10",
    )
    assert result.exit_code == 0, result.output
    assert "p-value" in result.output
    assert "dense.txt" in result.output and "fuse.txt" in result.output


def test_eval_rejects_unknown_metric(workspace, tmp_path):
    result = invoke(
        "eval", "--run", workspace / "data" / "qrels.txt", "--qrels", workspace / "data" / "qrels.txt",
        "--metrics", "mrr",
    )
    assert result.exit_code == 2


def test_lambda_sweep(workspace, tmp_path):
    out_dir = tmp_path / "sweep"
    qrels = workspace / "data" / "qrels.txt"
    result = invoke(
        "sweep", "--parameter", "lambda", "--values", "0,0.5,1", "--stage", "fuse",
        *data_args(workspace), "--qrels", qrels, "--out-dir", out_dir,
    )
    assert result.exit_code == 0, result.output
    assert sorted(os.listdir(out_dir)) == [
        "run.lambda-0.5.txt", "run.lambda-0.txt", "run.lambda-1.txt", "sweep.jsonl",
    ]
    records = [json.loads(line) for line in (out_dir / "sweep.jsonl").read_text(encoding="utf-8").splitlines()]
    means = {(r["run"], r["metric"]): r["value"] for r in records if r["query_id"] == "all"}
    assert len({run for run, _ in means}) == 3

    invoke("run", *data_args(workspace), "--out", tmp_path / "dense.txt")
    dense = evaluate_run(load_run(str(tmp_path / "dense.txt")), load_qrels(str(qrels)))
    for report in dense:
        assert means[("lambda-0", report.label)] == pytest.approx(report.mean, abs=1e-12)


def test_single_value_sweep_equals_run(workspace, tmp_path):
    flags = ["--stage", "pre", "--alpha", "0.5"]
    invoke(
        "sweep", "--parameter", "beta", "--values", "0.3", *flags, *data_args(workspace),
        "--qrels", workspace / "data" / "qrels.txt", "--out-dir", tmp_path / "sweep",
    )
    invoke("run", *flags, "--beta", "0.3", *data_args(workspace), "--out", tmp_path / "run.txt")
    assert (tmp_path / "sweep" / "run.beta-0.3.txt").read_bytes() == (tmp_path / "run.txt").read_bytes()


@pytest.mark.parametrize("values", ["", "0.5,0.2", "0.5,1.5"])
def test_invalid_sweeps_are_config_errors(workspace, tmp_path, values):
    result = invoke(
        "sweep", "--parameter", "lambda", "--values", values, "--stage", "fuse", *data_args(workspace),
        "--qrels", workspace / "data" / "qrels.txt", "--out-dir", tmp_path / "sweep",
    )
    assert result.exit_code == 2


def test_conditions(workspace, tmp_path):
    out_dir = tmp_path / "conditions"
    result = invoke(
        "conditions", *data_args(workspace), "--qrels", workspace / "data" / "qrels.txt", "--out-dir", out_dir,
    )
    assert result.exit_code == 0, result.output
    for name in ("dense", "vprf", "fuse", "pre", "post", "both"):
        assert (out_dir / f"run.{name}.txt").exists()
    assert "pre vs post" in result.output
    assert "both vs fuse" in result.output


def test_config_errors_exit_with_two(workspace, tmp_path):
    out = tmp_path / "run.txt"
    assert invoke("run", "--lambda", "1.5", "--stage", "fuse", *data_args(workspace), "--out", out).exit_code == 2
    no_sparse = [
        "--dense-store", workspace / "dense.bin",
        "--queries", workspace / "data" / "queries.tsv",
        "--qvecs", workspace / "data" / "query_vectors.txt",
    ]
    result = invoke("run", "--stage", "fuse", *no_sparse, "--out", out)
    assert result.exit_code == 2
    assert "bm25" in result.output
    assert invoke("run", "--stage", "none", "--prf", "on", "--depth", "2", *data_args(workspace), "--out", out).exit_code == 2


def test_sparse_only_and_impact_runs(workspace, tmp_path):
    result = invoke(
        "run", "--dense", "off", "--sparse-index", workspace / "bm25",
        "--queries", workspace / "data" / "queries.tsv", "--out", tmp_path / "bm25.txt",
    )
    assert result.exit_code == 0, result.output
    assert load_run(str(tmp_path / "bm25.txt"))[0].tag.startswith("fuseprf-sparse-bm25-")
    result = invoke(
        "run", "--stage", "fuse", "--sparse", "impact",
        "--sparse-index", workspace / "impact",
        "--query-weights", workspace / "data" / "query_weights.jsonl",
        "--dense-store", workspace / "dense.bin",
        "--queries", workspace / "data" / "queries.tsv",
        "--qvecs", workspace / "data" / "query_vectors.txt",
        "--out", tmp_path / "impact.txt",
    )
    assert result.exit_code == 0, result.output
    assert load_run(str(tmp_path / "impact.txt"))[0].tag.startswith("fuseprf-fuse-impact-")


def test_config_file_and_data_dir(workspace, tmp_path):
    config = tmp_path / "fuseprf.toml"
    config.write_text(
        '[pipeline]\nstage = "post"\nuse_prf = true\n\n[data]\n'
        'queries = "queries.tsv"\nqvecs = "query_vectors.txt"\n',
        encoding="utf-8",
    )
    env = {"FUSEPRF_DATA_DIR": str(workspace / "data")}
    result = invoke(
        "--config", config, "run", "--sparse-index", workspace / "bm25", "--dense-store", workspace / "dense.bin",
        "--out", tmp_path / "run.txt", env=env,
    )
    assert result.exit_code == 0, result.output
    assert load_run(str(tmp_path / "run.txt"))[0].tag.startswith("fuseprf-post-bm25-")
    result = invoke(
        "--config", config, "run", "--stage", "pre", "--sparse-index", workspace / "bm25",
        "--dense-store", workspace / "dense.bin", "--out", tmp_path / "pre.txt", env=env,
    )
    assert result.exit_code == 0, result.output
    assert load_run(str(tmp_path / "pre.txt"))[0].tag.startswith("fuseprf-pre-bm25-")


def test_gen_fixture_synthetic(tmp_path):
    result = invoke("gen-fixture", "--kind", "synthetic", "--seed", 13, "--out", tmp_path / "syn")
    assert result.exit_code == 0
    assert "200 passages, 25 queries, dimension 25" in result.output
    again = invoke("gen-fixture", "--kind", "synthetic", "--seed", 13, "--out", tmp_path / "syn2")
    assert again.exit_code == 0
    for name in ("corpus.jsonl", "qrels.txt", "passage_vectors.txt"):
        assert (tmp_path / "syn" / name).read_bytes() == (tmp_path / "syn2" / name).read_bytes()


def test_non_positive_dimension_is_a_usage_error(workspace, tmp_path):
    result = invoke(
        "index", "dense", "--vectors", workspace / "data" / "passage_vectors.txt", "--dim", 0,
        "--out", tmp_path / "d.bin",
    )
    assert result.exit_code == 2
    assert "--dim" in result.output
    assert not (tmp_path / "d.bin").exists()


def test_truncated_dense_snapshot_is_a_runtime_error(workspace, tmp_path):
    truncated = tmp_path / "dense.bin"
    truncated.write_bytes((workspace / "dense.bin").read_bytes()[:25])
    args = [
        "--sparse-index", workspace / "bm25",
        "--dense-store", truncated,
        "--queries", workspace / "data" / "queries.tsv",
        "--qvecs", workspace / "data" / "query_vectors.txt",
    ]
    result = invoke("run", *args, "--out", tmp_path / "run.txt")
    assert result.exit_code == 1
    assert result.exception is None or isinstance(result.exception, SystemExit)
