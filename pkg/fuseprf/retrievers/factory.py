"""Factory for creating sparse retriever instances."""

from typing import Mapping, Optional, Union

from ..schemas import Bm25Params, SparseBackend, TermWeightDoc
from .base import SparseRetriever
from .providers.bm25 import Bm25Retriever
from .providers.impact import ImpactRetriever


class SparseRetrieverFactory:
    """
    Factory class for creating sparse retriever instances.
    """

    _providers = {
        SparseBackend.BM25: Bm25Retriever,
        SparseBackend.IMPACT: ImpactRetriever,
    }

    @staticmethod
    def _provider(backend: Union[str, SparseBackend]):
        try:
            return SparseRetrieverFactory._providers[SparseBackend(backend)]
        except ValueError:
            raise ValueError(f"Unknown sparse backend: {backend}") from None

    @staticmethod
    def create(
        backend: Union[str, SparseBackend],
        index,
        params: Optional[Bm25Params] = None,
        query_weights: Optional[Mapping[str, TermWeightDoc]] = None,
    ) -> SparseRetriever:
        """
        Create a retriever over an already built index.

        Args:
            backend: Name of the backend ('bm25' or 'impact').
            index: The index matching the backend.
            params: BM25 parameters, ignored by the impact backend.
            query_weights: Encoded query weights, used by the impact backend.

        Returns:
            SparseRetriever: An instance of the requested retriever.
        """
        provider = SparseRetrieverFactory._provider(backend)
        if not isinstance(index, provider.index_type):
            raise ValueError(
                f"Backend '{SparseBackend(backend).value}' needs a {provider.index_type.__name__}"
            )
        return provider(index, params=params, query_weights=query_weights)

    @staticmethod
    def load(
        backend: Union[str, SparseBackend],
        directory: str,
        params: Optional[Bm25Params] = None,
        query_weights: Optional[Mapping[str, TermWeightDoc]] = None,
    ) -> SparseRetriever:
        """Create a retriever over an index persisted in ``directory``."""
        provider = SparseRetrieverFactory._provider(backend)
        index = provider.index_type.load(directory)
        return provider(index, params=params, query_weights=query_weights)
