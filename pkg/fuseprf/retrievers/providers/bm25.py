"""BM25 over a from-scratch inverted index."""

import logging
import math
from bisect import bisect_left
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

from ...errors import DuplicateIdError, EmptyInputError, MissingIdError
from ...schemas import Bm25Params, Passage, PipelineConfig, Query, ScoredList, SparseBackend
from ..base import SparseRetriever, tokenize
from ..storage import read_documents, read_manifest, read_postings, write_index_files

logger = logging.getLogger("fuseprf_logger")

INDEX_FORMAT = "fuseprf-bm25"
INDEX_VERSION = 1


class InvertedIndex:
    """
    Term -> postings structure with document lengths.

    Attributes:
        postings (Dict[str, List[Tuple[int, int]]]): (ordinal, term frequency)
            pairs sorted by ordinal.
        doc_lengths (List[int]): Token count per ordinal.
        doc_ids (List[str]): Passage id per ordinal.
        doc_count (int): Number of indexed passages.
        avg_doc_len (float): Mean of ``doc_lengths``.
    """

    def __init__(
        self,
        postings: Dict[str, List[Tuple[int, int]]],
        doc_lengths: List[int],
        doc_ids: List[str],
    ):
        if not doc_ids:
            raise EmptyInputError("cannot index an empty corpus")
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.doc_ids = doc_ids
        self.doc_count = len(doc_ids)
        self.avg_doc_len = sum(doc_lengths) / self.doc_count
        if self.avg_doc_len <= 0:
            raise EmptyInputError("corpus has no tokens; average length undefined")

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def term_frequency(self, term: str, doc: int) -> int:
        plist = self.postings.get(term)
        if not plist:
            return 0
        i = bisect_left(plist, doc, key=lambda p: p[0])
        if i < len(plist) and plist[i][0] == doc:
            return plist[i][1]
        return 0

    def save(self, directory: str) -> None:
        manifest = {
            "format": INDEX_FORMAT,
            "version": INDEX_VERSION,
            "doc_count": self.doc_count,
            "avg_doc_len": self.avg_doc_len,
            "term_count": len(self.postings),
        }
        write_index_files(
            directory, manifest, list(zip(self.doc_ids, self.doc_lengths)), self.postings
        )
        logger.info(f"Saved BM25 index ({self.doc_count} documents) to {directory}")

    @classmethod
    def load(cls, directory: str) -> "InvertedIndex":
        read_manifest(directory, INDEX_FORMAT, INDEX_VERSION)
        doc_ids: List[str] = []
        doc_lengths: List[int] = []
        for passage_id, length in read_documents(directory):
            doc_ids.append(passage_id)
            doc_lengths.append(length)
        postings = {
            term: [(int(o), int(tf)) for o, tf in plist]
            for term, plist in read_postings(directory)
        }
        return cls(postings, doc_lengths, doc_ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InvertedIndex):
            return NotImplemented
        return (
            self.doc_ids == other.doc_ids
            and self.doc_lengths == other.doc_lengths
            and self.postings == other.postings
        )


def build_index(corpus: Sequence[Passage]) -> InvertedIndex:
    """
    Build an inverted index; ordinals follow corpus order.

    Raises:
        EmptyInputError: When the corpus is empty.
        DuplicateIdError: When a passage id repeats.
    """
    if not corpus:
        raise EmptyInputError("cannot index an empty corpus")
    postings: Dict[str, List[Tuple[int, int]]] = {}
    doc_lengths: List[int] = []
    doc_ids: List[str] = []
    seen = set()
    for ordinal, passage in enumerate(corpus):
        if passage.id in seen:
            raise DuplicateIdError(passage.id)
        seen.add(passage.id)
        tokens = tokenize(passage.text)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((ordinal, tf))
        doc_lengths.append(len(tokens))
        doc_ids.append(passage.id)
    index = InvertedIndex(postings, doc_lengths, doc_ids)
    logger.info(
        f"Built BM25 index: {index.doc_count} documents, {len(postings)} terms, "
        f"avg length {index.avg_doc_len:.2f}"
    )
    return index


def idf(doc_count: int, df: int) -> float:
    """Lucene idf: ln(1 + (N - df + 0.5) / (df + 0.5)), never negative."""
    return math.log(1.0 + (doc_count - df + 0.5) / (df + 0.5))


def _contribution(
    term_idf: float, tf: int, doc_len: int, avg_doc_len: float, params: Bm25Params
) -> float:
    norm = params.k1 * (1.0 - params.b + params.b * doc_len / avg_doc_len)
    return term_idf * tf / (tf + norm)


def bm25_score(
    index: InvertedIndex, params: Bm25Params, query_terms: Sequence[str], doc: int
) -> float:
    """
    Score one document for a bag of query terms; repeated terms count once.

    Raises:
        MissingIdError: When ``doc`` is not an ordinal of the index.
    """
    if not 0 <= doc < index.doc_count:
        raise MissingIdError(str(doc), "document ordinal")
    score = 0.0
    for term in dict.fromkeys(query_terms):
        tf = index.term_frequency(term, doc)
        if tf:
            term_idf = idf(index.doc_count, index.document_frequency(term))
            score += _contribution(
                term_idf, tf, index.doc_lengths[doc], index.avg_doc_len, params
            )
    return score


def search_bm25(
    index: InvertedIndex, params: Bm25Params, query: Query, depth: int
) -> ScoredList:
    """Exhaustive term-at-a-time BM25 search; zero-score passages are dropped."""
    accumulators: Dict[int, float] = {}
    for term in dict.fromkeys(tokenize(query.text)):
        plist = index.postings.get(term)
        if not plist:
            continue
        term_idf = idf(index.doc_count, len(plist))
        for ordinal, tf in plist:
            accumulators[ordinal] = accumulators.get(ordinal, 0.0) + _contribution(
                term_idf, tf, index.doc_lengths[ordinal], index.avg_doc_len, params
            )
    scores = {index.doc_ids[o]: s for o, s in accumulators.items() if s > 0.0}
    return ScoredList.from_scores(query.id, scores, depth)


class Bm25Retriever(SparseRetriever):
    """Unsupervised bag-of-words retriever."""

    backend = SparseBackend.BM25
    index_type = InvertedIndex

    def __init__(
        self,
        index: InvertedIndex,
        params: Optional[Bm25Params] = None,
        query_weights: Optional[dict] = None,
    ):
        self.index = index
        self.params = params or Bm25Params()

    @property
    def doc_count(self) -> int:
        return self.index.doc_count

    def configured(self, config: PipelineConfig) -> "Bm25Retriever":
        if config.bm25 == self.params:
            return self
        return Bm25Retriever(self.index, config.bm25)

    def search(self, query: Query, depth: int) -> ScoredList:
        return search_bm25(self.index, self.params, query, depth)
