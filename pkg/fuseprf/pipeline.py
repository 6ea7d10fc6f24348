"""
Retrieval pipelines: sparse or dense baselines, vector PRF, and the
interpolation placements around feedback.

Every placement shares the same two-round skeleton. Round one retrieves a
dense list (and, when fusion is involved, a sparse list that is computed once
and reused). Feedback passages are the top of the list the stage designates,
their dense vectors update the query, and round two is always dense.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from .corpus_io import load_term_weights
from .dense_store import DenseStore
from .errors import ConfigError, DimensionMismatchError, MissingIdError
from .fusion import interpolate
from .prf import rocchio_update, select_feedback
from .retrievers.base import SparseRetriever
from .retrievers.factory import SparseRetrieverFactory
from .schemas import (
    ConfigLike,
    PipelineConfig,
    PipelineResult,
    Query,
    RunEntry,
    Similarity,
    SparseBackend,
    Stage,
)

logger = logging.getLogger("fuseprf_logger")

_FUSE_FIRST_ROUND = (Stage.FUSE, Stage.PRE, Stage.BOTH)
_FUSE_SECOND_ROUND = (Stage.POST, Stage.BOTH)


def to_pipeline_config(config: ConfigLike) -> PipelineConfig:
    """Accepts a PipelineConfig, a plain dict or None; raises ConfigError on invalid input."""
    if isinstance(config, PipelineConfig):
        return config
    try:
        return PipelineConfig.model_validate(config or {})
    except ValidationError as e:
        raise ConfigError(f"invalid pipeline configuration: {e}") from e


class RetrievalIndexes:
    """
    Read-only bundle of the structures a pipeline searches.

    Attributes:
        dense (Optional[DenseStore]): Passage vectors.
        sparse (Dict[SparseBackend, SparseRetriever]): Sparse retrievers by backend.
    """

    def __init__(
        self,
        dense: Optional[DenseStore] = None,
        sparse: Optional[Mapping[SparseBackend, SparseRetriever]] = None,
    ):
        self.dense = dense
        self.sparse: Dict[SparseBackend, SparseRetriever] = {
            SparseBackend(k): v for k, v in (sparse or {}).items()
        }

    def __repr__(self):
        dense = f"{len(self.dense)}x{self.dense.dim}" if self.dense is not None else None
        return f"RetrievalIndexes(dense={dense}, sparse={sorted(b.value for b in self.sparse)})"


class HybridPipeline:
    config: PipelineConfig
    indexes: RetrievalIndexes

    def __init__(self, indexes: RetrievalIndexes, config: ConfigLike = None):
        """
        Initialize a pipeline over loaded indexes.

        Args:
            indexes (RetrievalIndexes): The structures to search; never modified.
            config (Optional[Union[Dict, PipelineConfig]]): Pipeline settings. A dict
                is validated into PipelineConfig; None gives the defaults.

        Raises:
            ConfigError: When the configuration is invalid or needs an index
                that is not loaded.
        """
        self.config = to_pipeline_config(config)
        self.indexes = indexes
        self.sparse: Optional[SparseRetriever] = None
        if self.config.needs_sparse:
            retriever = indexes.sparse.get(self.config.sparse_backend)
            if retriever is None:
                raise ConfigError(
                    f"stage needs the '{self.config.sparse_backend.value}' sparse index, "
                    "which is not loaded"
                )
            self.sparse = retriever.configured(self.config)
        if self.config.use_dense and indexes.dense is None:
            raise ConfigError("configuration uses dense retrieval but no dense store is loaded")

    def _query_vector(self, query: Query, query_vector) -> Optional[np.ndarray]:
        if not self.config.use_dense:
            return None
        if query_vector is None:
            raise MissingIdError(query.id, "query vector")
        vector = np.asarray(query_vector, dtype=np.float64)
        if vector.shape != (self.indexes.dense.dim,):
            raise DimensionMismatchError(
                f"query '{query.id}' vector has shape {vector.shape}, "
                f"store dimension is {self.indexes.dense.dim}"
            )
        return vector

    def run_query(self, query: Query, query_vector=None) -> PipelineResult:
        """
        Run one query through the configured flow.

        Args:
            query (Query): Query id and text; the text feeds the sparse retriever.
            query_vector: Dense query vector, required whenever dense retrieval runs.

        Returns:
            PipelineResult: The final list and every intermediate list.
        """
        cfg = self.config
        depth = cfg.retrieval_depth
        vector = self._query_vector(query, query_vector)

        sparse = self.sparse.search(query, depth) if self.sparse is not None else None
        source = self.sparse.query_weight_source(query) if self.sparse is not None else "none"
        if vector is None:
            return PipelineResult(final=sparse, round1_sparse=sparse, query_weight_source=source)

        store = self.indexes.dense
        dense1 = store.top_k(vector, depth, query.id)
        fused1 = interpolate(sparse, dense1, cfg.fusion) if cfg.stage in _FUSE_FIRST_ROUND else None
        if not cfg.use_prf:
            return PipelineResult(
                final=fused1 if cfg.stage == Stage.FUSE else dense1,
                round1_dense=dense1,
                round1_sparse=sparse,
                round1_fused=fused1,
                query_weight_source=source,
            )

        feedback_list = fused1 if fused1 is not None else dense1
        feedback_ids = select_feedback(feedback_list, cfg.prf.depth_k)
        prf_query = rocchio_update(
            vector,
            store.fetch_vectors(feedback_ids),
            cfg.prf.alpha,
            cfg.prf.beta,
            cfg.prf.aggregation,
        )
        dense2 = store.top_k(prf_query, depth, query.id)
        final = interpolate(sparse, dense2, cfg.fusion) if cfg.stage in _FUSE_SECOND_ROUND else dense2
        logger.debug(f"Query {query.id}: feedback {feedback_ids}, final {len(final)} passages")
        return PipelineResult(
            final=final,
            round1_dense=dense1,
            round1_sparse=sparse,
            round1_fused=fused1,
            prf_query=prf_query,
            round2_dense=dense2,
            feedback_ids=feedback_ids,
            query_weight_source=source,
        )

    def run_batch_results(
        self,
        queries: Sequence[Query],
        query_vectors: Mapping[str, Sequence[float]],
        threads: Optional[int] = None,
    ) -> List[PipelineResult]:
        """Run every query; results come back in query order whatever the thread count."""
        if self.config.use_dense:
            for query in queries:
                if query.id not in query_vectors:
                    raise MissingIdError(query.id, "query vector")
        workers = max(1, threads or os.cpu_count() or 1)
        try:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(
                    pool.map(lambda q: self.run_query(q, query_vectors.get(q.id)), queries)
                )
        except Exception as e:
            logger.error(f"Error running batch with tag {self.config.tag()}: {str(e)}")
            raise
        fallbacks = sum(1 for r in results if r.query_weight_source == "tf")
        if fallbacks:
            logger.warning(
                f"{fallbacks} of {len(results)} queries had no encoded impact weights; "
                "term counts were used"
            )
        logger.info(f"Ran {len(results)} queries with tag {self.config.tag()} on {workers} threads")
        return results

    def run_batch(
        self,
        queries: Sequence[Query],
        query_vectors: Mapping[str, Sequence[float]],
        threads: Optional[int] = None,
    ) -> List[RunEntry]:
        """
        Run every query and flatten the final lists into run entries.

        Ranks follow list order and the tag is the configuration digest.

        Raises:
            MissingIdError: When dense retrieval runs and a query has no vector.
        """
        tag = self.config.tag()
        entries: List[RunEntry] = []
        for result in self.run_batch_results(queries, query_vectors, threads):
            entries.extend(result.final.to_run_entries(tag))
        return entries


def load_indexes(
    dense_store: Optional[str] = None,
    sparse_index: Optional[str] = None,
    sparse_backend: Union[str, SparseBackend] = SparseBackend.BM25,
    query_weights: Optional[str] = None,
    similarity: Union[str, Similarity] = Similarity.INNER_PRODUCT,
) -> RetrievalIndexes:
    """
    Load whichever persisted structures are named.

    Args:
        dense_store (Optional[str]): Dense snapshot written by ``DenseStore.save``.
        sparse_index (Optional[str]): Sparse index directory of ``sparse_backend``.
        sparse_backend (SparseBackend): Backend the sparse directory holds.
        query_weights (Optional[str]): Encoded impact query weights (JSON lines).
        similarity (Similarity): Dense similarity function.

    Returns:
        RetrievalIndexes: The loaded bundle; absent paths leave slots empty.
    """
    dense = DenseStore.load(dense_store, similarity) if dense_store else None
    sparse: Dict[SparseBackend, SparseRetriever] = {}
    if sparse_index:
        backend = SparseBackend(sparse_backend)
        weights = load_term_weights(query_weights) if query_weights else None
        sparse[backend] = SparseRetrieverFactory.load(backend, sparse_index, query_weights=weights)
    indexes = RetrievalIndexes(dense=dense, sparse=sparse)
    logger.info(f"Loaded {indexes}")
    return indexes
