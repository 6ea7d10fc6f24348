"""
Desk-scale fixture generation.

``synthetic`` builds 25 topics of 8 passages each (200 passages, dim 25) in
which the sparse and dense retrievers carry complementary evidence:

    role  grade  topic-term tf  dense score
    A     3      2              0.9   dense favours, sparse moderate
    B     2      4              0.5   sparse favours, dense moderate
    D     0      0              0.8   dense distractor
    S     1      3              0.2   sparse distractor (grade 1 is not relevant)
    W     0      1              0.1   weak match

Every passage has the same token count, so BM25 depends on tf alone, and the
dense vectors are scaled basis vectors, so a topic's passages are orthogonal to
every other topic's query. Dense-only ranking puts D above B and sparse-only
ranking puts S above A; an even interpolation puts A and B on top.
"""

import math
import os
from typing import Dict, List, Tuple

import numpy as np

from .corpus_io import write_corpus, write_qrels, write_queries, write_term_weights, write_vectors
from .schemas import Passage, Qrels, Query, TermWeightDoc

CORPUS_FILE = "corpus.jsonl"
QUERIES_FILE = "queries.tsv"
QRELS_FILE = "qrels.txt"
PASSAGE_VECTORS_FILE = "passage_vectors.txt"
QUERY_VECTORS_FILE = "query_vectors.txt"
PASSAGE_WEIGHTS_FILE = "passage_weights.jsonl"
QUERY_WEIGHTS_FILE = "query_weights.jsonl"

SYNTHETIC_TOPICS = 25
PASSAGE_LENGTH = 12
FILLER_WORDS = [
    "river", "stone", "paper", "window", "engine", "garden", "silver", "market",
    "ladder", "candle", "harbor", "pencil", "meadow", "bridge", "violet", "copper",
]
# role -> (grade, topic-term tf, dense score, count)
ROLES: Dict[str, Tuple[int, int, float, int]] = {
    "A": (3, 2, 0.9, 2),
    "B": (2, 4, 0.5, 2),
    "D": (0, 0, 0.8, 2),
    "S": (1, 3, 0.2, 1),
    "W": (0, 1, 0.1, 1),
}


class Fixture:
    """All files of one generated collection, in memory."""

    def __init__(
        self,
        passages: List[Passage],
        queries: List[Query],
        qrels: Qrels,
        passage_vectors: Dict[str, np.ndarray],
        query_vectors: Dict[str, np.ndarray],
        passage_weights: List[TermWeightDoc],
        query_weights: List[TermWeightDoc],
    ):
        self.passages = passages
        self.queries = queries
        self.qrels = qrels
        self.passage_vectors = passage_vectors
        self.query_vectors = query_vectors
        self.passage_weights = passage_weights
        self.query_weights = query_weights

    @property
    def dim(self) -> int:
        return len(next(iter(self.passage_vectors.values())))

    def write(self, out_dir: str) -> Dict[str, str]:
        """Write every file into ``out_dir``; returns role -> path."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "corpus": os.path.join(out_dir, CORPUS_FILE),
            "queries": os.path.join(out_dir, QUERIES_FILE),
            "qrels": os.path.join(out_dir, QRELS_FILE),
            "passage_vectors": os.path.join(out_dir, PASSAGE_VECTORS_FILE),
            "query_vectors": os.path.join(out_dir, QUERY_VECTORS_FILE),
            "passage_weights": os.path.join(out_dir, PASSAGE_WEIGHTS_FILE),
            "query_weights": os.path.join(out_dir, QUERY_WEIGHTS_FILE),
        }
        write_corpus(self.passages, paths["corpus"])
        write_queries(self.queries, paths["queries"])
        write_qrels(self.qrels, paths["qrels"])
        write_vectors(self.passage_vectors, paths["passage_vectors"])
        write_vectors(self.query_vectors, paths["query_vectors"])
        write_term_weights(self.passage_weights, paths["passage_weights"])
        write_term_weights(self.query_weights, paths["query_weights"])
        return paths


def generate_synthetic(seed: int = 13, topics: int = SYNTHETIC_TOPICS) -> Fixture:
    """Seeded complementary-signal collection; see the module docstring."""
    rng = np.random.default_rng(seed)
    per_topic = sum(count for *_rest, count in ROLES.values())
    ordinals = rng.permutation(topics * per_topic)
    passages: List[Passage] = []
    passage_vectors: Dict[str, np.ndarray] = {}
    passage_weights: List[TermWeightDoc] = []
    queries: List[Query] = []
    query_vectors: Dict[str, np.ndarray] = {}
    query_weights: List[TermWeightDoc] = []
    qrels: Qrels = {}

    slot = 0
    for topic in range(topics):
        term = f"topic{topic:02d}"
        query_id = f"q{topic:02d}"
        queries.append(Query(id=query_id, text=term))
        basis = np.zeros(topics, dtype=np.float32)
        basis[topic] = 1.0
        query_vectors[query_id] = basis
        query_weights.append(TermWeightDoc(id=query_id, weights={term: 1.0}))
        qrels[query_id] = {}
        for role, (grade, tf, dense_score, count) in ROLES.items():
            for _ in range(count):
                passage_id = f"p{int(ordinals[slot]):03d}"
                slot += 1
                filler = rng.choice(FILLER_WORDS, size=PASSAGE_LENGTH - tf).tolist()
                tokens = [term] * tf + filler
                rng.shuffle(tokens)
                passages.append(Passage(id=passage_id, text=" ".join(tokens)))
                passage_vectors[passage_id] = basis * np.float32(dense_score)
                counts: Dict[str, int] = {}
                for token in tokens:
                    counts[token] = counts.get(token, 0) + 1
                passage_weights.append(
                    TermWeightDoc(
                        id=passage_id,
                        weights={t: round(math.log1p(c), 6) for t, c in sorted(counts.items())},
                    )
                )
                qrels[query_id][passage_id] = grade
    passages.sort(key=lambda p: p.id)
    passage_weights.sort(key=lambda d: d.id)
    passage_vectors = dict(sorted(passage_vectors.items()))
    return Fixture(
        passages, queries, qrels, passage_vectors, query_vectors, passage_weights, query_weights
    )


def generate_tiny() -> Fixture:
    """The 6-passage, 2-query, dimension-3 collection committed under tests/fixtures/tiny."""
    texts = {
        "d1": "cats chase mice in the garden",
        "d2": "dogs chase cats around the yard",
        "d3": "the garden has roses and tulips",
        "d4": "mice eat cheese in the kitchen",
        "d5": "a dog sleeps in the yard",
        "d6": "cheese and wine pair well",
    }
    vectors = {
        "d1": [0.9, 0.1, 0.0],
        "d2": [0.7, 0.3, 0.1],
        "d3": [0.1, 0.8, 0.2],
        "d4": [0.5, 0.2, 0.7],
        "d5": [0.3, 0.6, 0.1],
        "d6": [0.0, 0.2, 0.9],
    }
    weights = {
        "d1": {"cats": 1.2, "chase": 0.5, "mice": 1.1, "garden": 0.4, "kitten": 0.6},
        "d2": {"dogs": 1.0, "chase": 0.6, "cats": 0.9, "yard": 0.3},
        "d3": {"garden": 1.3, "roses": 1.0, "tulips": 0.9, "flowers": 0.7},
        "d4": {"mice": 1.0, "eat": 0.3, "cheese": 1.2, "kitchen": 0.8},
        "d5": {"dog": 1.1, "sleeps": 0.7, "yard": 0.6},
        "d6": {"cheese": 1.4, "wine": 1.2, "pair": 0.2},
    }
    return Fixture(
        passages=[Passage(id=pid, text=text) for pid, text in texts.items()],
        queries=[
            Query(id="q1", text="cats and mice"),
            Query(id="q2", text="cheese in the kitchen"),
        ],
        qrels={
            "q1": {"d1": 3, "d4": 2, "d2": 1, "d3": 0},
            "q2": {"d4": 3, "d6": 2, "d3": 0, "d1": 1},
        },
        passage_vectors={pid: np.array(v, dtype=np.float32) for pid, v in vectors.items()},
        query_vectors={
            "q1": np.array([1.0, 0.2, 0.1], dtype=np.float32),
            "q2": np.array([0.1, 0.1, 1.0], dtype=np.float32),
        },
        passage_weights=[TermWeightDoc(id=pid, weights=w) for pid, w in weights.items()],
        query_weights=[TermWeightDoc(id="q1", weights={"cats": 1.5, "mice": 1.2, "kitten": 0.4})],
    )
