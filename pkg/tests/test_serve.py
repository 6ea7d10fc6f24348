import threading
import time

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from fuseprf.cli import main
from fuseprf.config import deep_merge
from fuseprf.corpus_io import load_run
from fuseprf.pipeline import HybridPipeline
from fuseprf.schemas import PipelineConfig, Query
from fuseprf.serve import create_app
from tests.conftest import tiny_path

BASE = PipelineConfig(stage="both", use_prf=True)


def wait_ready(client, timeout=10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        response = client.get("/healthz")
        if response.status_code == 200:
            return response.json()
        time.sleep(0.01)
    raise AssertionError("service did not become ready")


@pytest.fixture()
def client(tiny_indexes):
    app = create_app(lambda: tiny_indexes, BASE)
    with TestClient(app) as test_client:
        wait_ready(test_client)
        yield test_client


def test_healthz_reports_loaded_indexes(client):
    body = client.get("/healthz").json()
    assert body == {"status": "ok", "passages": 6, "sparse": {"bm25": 6, "impact": 6}}


def test_randomized_requests_match_the_library(client, tiny_indexes, tiny_queries, tiny_query_vectors):
    rng = np.random.default_rng(11)
    stages = [("none", False), ("none", True), ("fuse", False), ("pre", True), ("post", True), ("both", True)]
    for _ in range(20):
        query = tiny_queries[int(rng.integers(len(tiny_queries)))]
        stage, use_prf = stages[int(rng.integers(len(stages)))]
        overrides = {
            "stage": stage,
            "use_prf": use_prf,
            "fusion": {"lambda": round(float(rng.uniform()), 3)},
            "prf": {"beta": round(float(rng.uniform(0.1, 1.0)), 3)},
        }
        vector = [float(v) for v in tiny_query_vectors[query.id]]
        response = client.post(
            "/search",
            json={"query_id": query.id, "query_text": query.text, "query_vector": vector, "overrides": overrides},
        )
        assert response.status_code == 200, response.text
        body = response.json()

        config = PipelineConfig.model_validate(deep_merge(BASE.prune(), overrides))
        expected = HybridPipeline(tiny_indexes, config).run_query(query, vector).final
        assert [(r["passage_id"], r["score"]) for r in body["results"]] == expected.entries
        assert body["tag"] == config.tag()
        assert body["config"] == config.prune()


def test_service_matches_cli_run(client, tmp_path, tiny_queries, tiny_query_vectors):
    run_path = tmp_path / "run.txt"
    runner = CliRunner()
    runner.invoke(main, ["index", "sparse", "--corpus", tiny_path("corpus.jsonl"), "--out", str(tmp_path / "bm25")])
    runner.invoke(
        main,
        ["index", "dense", "--vectors", tiny_path("passage_vectors.txt"), "--dim", "3", "--out", str(tmp_path / "d.bin")],
    )
    result = runner.invoke(
        main,
        [
            "run", "--stage", "both",
            "--sparse-index", str(tmp_path / "bm25"),
            "--dense-store", str(tmp_path / "d.bin"),
            "--queries", tiny_path("queries.tsv"),
            "--qvecs", tiny_path("query_vectors.txt"),
            "--out", str(run_path),
        ],
    )
    assert result.exit_code == 0, result.output
    entries = load_run(str(run_path))
    for query in tiny_queries:
        body = client.post(
            "/search",
            json={"query_id": query.id, "query_text": query.text, "query_vector": tiny_query_vectors[query.id].tolist()},
        ).json()
        expected = [(e.passage_id, f"{e.score:.6f}") for e in entries if e.query_id == query.id]
        assert [(r["passage_id"], f"{r['score']:.6f}") for r in body["results"]] == expected
        assert body["tag"] == entries[0].tag


def test_invalid_override_names_the_field(client, tiny_query_vectors):
    response = client.post(
        "/search",
        json={"query_text": "cats", "query_vector": tiny_query_vectors["q1"].tolist(),
              "overrides": {"fusion": {"lambda": 1.5}}},
    )
    assert response.status_code == 400
    assert "fusion.lambda" in [error["field"] for error in response.json()["detail"]]


def test_wrong_vector_length_is_rejected(client):
    response = client.post("/search", json={"query_text": "cats", "query_vector": [1.0, 0.0]})
    assert response.status_code == 400
    assert "dimension" in response.json()["detail"]


def test_malformed_body_is_rejected(client):
    assert client.post("/search", json={"query_vector": "north"}).status_code == 400
    assert client.post("/search", json={"query_id": ""}).status_code == 400


def test_dense_request_without_vector_is_rejected(client):
    response = client.post("/search", json={"query_id": "q7", "query_text": "cats"})
    assert response.status_code == 400
    assert "q7" in response.json()["detail"]


def test_unavailable_until_loaded(tiny_indexes):
    release = threading.Event()

    def loader():
        release.wait(10)
        return tiny_indexes

    app = create_app(loader, PipelineConfig())
    with TestClient(app) as test_client:
        assert test_client.get("/healthz").status_code == 503
        response = test_client.post("/search", json={"query_text": "cats", "query_vector": [1.0, 0.0, 0.0]})
        assert response.status_code == 503
        release.set()
        wait_ready(test_client)
        response = test_client.post("/search", json={"query_text": "cats", "query_vector": [1.0, 0.0, 0.0]})
        assert response.status_code == 200


def test_failed_load_is_reported(tiny_indexes):
    def loader():
        raise FileNotFoundError("no such index: /nowhere")

    app = create_app(loader, PipelineConfig())
    with TestClient(app) as test_client:
        deadline = time.monotonic() + 10
        while app.state.service.load_error is None and time.monotonic() < deadline:
            time.sleep(0.01)
        response = test_client.get("/healthz")
        assert response.status_code == 503
        assert "/nowhere" in response.json()["error"]


def test_impact_override_uses_encoded_query_weights(client, tiny_indexes, tiny_query_vectors):
    # impact weights are looked up by query id
    body = client.post(
        "/search",
        json={"query_id": "q1", "query_text": "cats and mice", "query_vector": tiny_query_vectors["q1"].tolist(),
              "overrides": {"stage": "fuse", "use_prf": False, "sparse_backend": "impact"}},
    ).json()
    assert body["query_weight_source"] == "file"
    pipeline = HybridPipeline(tiny_indexes, body["config"])
    expected = pipeline.run_query(Query(id="q1", text="cats and mice"), tiny_query_vectors["q1"]).final
    assert [(r["passage_id"], r["score"]) for r in body["results"]] == expected.entries


@pytest.mark.parametrize("vector", [[1e308, 1e308, 1e308], [1e200, 0.0, 0.0]])
def test_overflowing_vector_is_rejected(client, vector):
    response = client.post("/search", json={"query_text": "cats", "query_vector": vector})
    assert response.status_code == 400
    assert "body.query_vector" in [error["field"] for error in response.json()["detail"]]


def test_largest_safe_vector_is_served(client):
    response = client.post("/search", json={"query_text": "cats", "query_vector": [1e150, 1e150, 1e150]})
    assert response.status_code == 200, response.text
    assert len(response.json()["results"]) == 6
