"""Learned-impact retrieval: query/document term-weight dot products."""

import logging
from collections import Counter
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from ...errors import DuplicateIdError, EmptyInputError
from ...schemas import Bm25Params, Query, ScoredList, SparseBackend, TermWeightDoc
from ..base import SparseRetriever, tokenize
from ..storage import read_documents, read_manifest, read_postings, write_index_files

logger = logging.getLogger("fuseprf_logger")

INDEX_FORMAT = "fuseprf-impact"
INDEX_VERSION = 1


class ImpactIndex:
    """
    Term -> postings structure holding precomputed real-valued weights.

    Attributes:
        postings (Dict[str, List[Tuple[int, float]]]): (ordinal, weight) pairs
            sorted by ordinal; zero weights are not stored.
        doc_ids (List[str]): Passage id per ordinal.
    """

    def __init__(self, postings: Dict[str, List[Tuple[int, float]]], doc_ids: List[str]):
        if not doc_ids:
            raise EmptyInputError("cannot index an empty set of term-weight records")
        self.postings = postings
        self.doc_ids = doc_ids

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    def save(self, directory: str) -> None:
        manifest = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "doc_count": self.doc_count,
            "term_count": len(self.postings),
        }
        lengths = [0] * self.doc_count
        for plist in self.postings.values():
            for ordinal, _weight in plist:
                lengths[ordinal] += 1
        write_index_files(directory, manifest, list(zip(self.doc_ids, lengths)), self.postings)
        logger.info(f"Saved impact index ({self.doc_count} documents) to {directory}")

    @classmethod
    def load(cls, directory: str) -> "ImpactIndex":
        read_manifest(directory, INDEX_FORMAT, INDEX_VERSION)
        doc_ids = [passage_id for passage_id, _length in read_documents(directory)]
        postings = {
            term: [(int(o), float(w)) for o, w in plist]
            for term, plist in read_postings(directory)
        }
        return cls(postings, doc_ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImpactIndex):
            return NotImplemented
        return self.doc_ids == other.doc_ids and self.postings == other.postings


def build_impact_index(docs: Iterable[TermWeightDoc]) -> ImpactIndex:
    """Build an impact index; ordinals follow input order."""
    postings: Dict[str, List[Tuple[int, float]]] = {}
    doc_ids: List[str] = []
    seen = set()
    for ordinal, doc in enumerate(docs):
        if doc.id in seen:
            raise DuplicateIdError(doc.id)
        seen.add(doc.id)
        doc_ids.append(doc.id)
        for term, weight in doc.weights.items():
            if weight > 0.0:
                postings.setdefault(term, []).append((ordinal, float(weight)))
    index = ImpactIndex(postings, doc_ids)
    logger.info(f"Built impact index: {index.doc_count} documents, {len(postings)} terms")
    return index


def search_impact(
    index: ImpactIndex,
    query_weights: Mapping[str, float],
    depth: int,
    query_id: str = "",
) -> ScoredList:
    """Score every passage by sum over terms of query weight times document weight."""
    accumulators: Dict[int, float] = {}
    for term, query_weight in query_weights.items():
        if query_weight < 0.0:
            raise ValueError(f"negative query weight {query_weight} for term '{term}'")
        plist = index.postings.get(term)
        if not plist or query_weight == 0.0:
            continue
        for ordinal, weight in plist:
            accumulators[ordinal] = accumulators.get(ordinal, 0.0) + query_weight * weight
    scores = {index.doc_ids[o]: s for o, s in accumulators.items() if s > 0.0}
    return ScoredList.from_scores(query_id, scores, depth)


def tf_weights(text: str) -> Dict[str, float]:
    """Query-side fallback: each term weighted by its count in the text."""
    return {term: float(tf) for term, tf in Counter(tokenize(text)).items()}


class ImpactRetriever(SparseRetriever):
    """Learned sparse retriever over precomputed impact weights."""

    backend = SparseBackend.IMPACT
    index_type = ImpactIndex

    def __init__(
        self,
        index: ImpactIndex,
        params: Optional[Bm25Params] = None,
        query_weights: Optional[Mapping[str, TermWeightDoc]] = None,
    ):
        self.index = index
        self.query_weights = dict(query_weights or {})

    @property
    def doc_count(self) -> int:
        return self.index.doc_count

    def weights_for(self, query: Query) -> Dict[str, float]:
        encoded = self.query_weights.get(query.id)
        if encoded is not None:
            return encoded.weights
        logger.debug(f"No encoded weights for query {query.id}; using term counts")
        return tf_weights(query.text)

    def query_weight_source(self, query: Query) -> str:
        return "file" if query.id in self.query_weights else "tf"

    def search(self, query: Query, depth: int) -> ScoredList:
        return search_impact(self.index, self.weights_for(query), depth, query.id)
