import os

import pytest

from fuseprf.corpus_io import load_corpus, load_qrels, load_queries, load_term_weights, load_vectors
from fuseprf.dense_store import DenseStore
from fuseprf.pipeline import RetrievalIndexes
from fuseprf.retrievers.providers.bm25 import Bm25Retriever, build_index
from fuseprf.retrievers.providers.impact import ImpactRetriever, build_impact_index
from fuseprf.schemas import SparseBackend

TINY_DIR = os.path.join(os.path.dirname(__file__), "fixtures", "tiny")


def tiny_path(name: str) -> str:
    return os.path.join(TINY_DIR, name)


@pytest.fixture(scope="session")
def tiny_corpus():
    return load_corpus(tiny_path("corpus.jsonl"))


@pytest.fixture(scope="session")
def tiny_queries():
    return load_queries(tiny_path("queries.tsv"))


@pytest.fixture(scope="session")
def tiny_qrels():
    return load_qrels(tiny_path("qrels.txt"))


@pytest.fixture(scope="session")
def tiny_query_vectors():
    return load_vectors(tiny_path("query_vectors.txt"), 3)


@pytest.fixture(scope="session")
def tiny_indexes(tiny_corpus):
    weights = load_term_weights(tiny_path("passage_weights.jsonl"))
    query_weights = load_term_weights(tiny_path("query_weights.jsonl"))
    return RetrievalIndexes(
        dense=DenseStore.from_vector_file(tiny_path("passage_vectors.txt"), 3),
        sparse={
            SparseBackend.BM25: Bm25Retriever(build_index(tiny_corpus)),
            SparseBackend.IMPACT: ImpactRetriever(
                build_impact_index(weights.values()), query_weights=query_weights
            ),
        },
    )
