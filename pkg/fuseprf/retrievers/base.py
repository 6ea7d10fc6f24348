"""Abstract base class for sparse retrievers and the shared tokenizer."""

import re
from abc import ABC, abstractmethod
from typing import List

from ..schemas import PipelineConfig, Query, ScoredList, SparseBackend

_TOKEN_PATTERN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> List[str]:
    """
    Lowercase ``text`` and split it on every non-alphanumeric character.

    Args:
        text (str): Raw passage or query text.

    Returns:
        List[str]: Non-empty tokens in text order.
    """
    return _TOKEN_PATTERN.findall(text.lower())


class SparseRetriever(ABC):
    """Interface shared by the term-matching retrievers."""

    backend: SparseBackend

    @abstractmethod
    def search(self, query: Query, depth: int) -> ScoredList:
        """
        Rank passages for ``query``.

        Args:
            query: The query to score.
            depth: Maximum number of passages returned.

        Returns:
            ScoredList: Passages with a nonzero score, best first.
        """
        raise NotImplementedError("Subclasses must implement the search method.")

    def configured(self, config: PipelineConfig) -> "SparseRetriever":
        """Returns a retriever honouring the per-pipeline parameters in ``config``."""
        return self

    def query_weight_source(self, query: Query) -> str:
        """Origin of the query representation, reported in pipeline traces."""
        return "none"

    @property
    @abstractmethod
    def doc_count(self) -> int:
        raise NotImplementedError
