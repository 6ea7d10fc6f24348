"""Rocchio vector pseudo-relevance feedback."""

from typing import List, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, EmptyInputError
from .schemas import Aggregation, ScoredList


def rocchio_update(
    q: Sequence[float],
    feedback: Sequence[Sequence[float]],
    alpha: float,
    beta: float,
    aggregation: Union[str, Aggregation] = Aggregation.MEAN,
) -> np.ndarray:
    """
    Build a feedback query vector: alpha * q + beta * centroid(feedback).

    Args:
        q: Original query vector.
        feedback: Vectors of the feedback passages.
        alpha: Weight of the original query.
        beta: Weight of the feedback vectors.
        aggregation: ``mean`` (centroid) or ``sum`` of the feedback vectors.

    Returns:
        np.ndarray: float64 vector of the same dimension as ``q``.

    Raises:
        EmptyInputError: When ``feedback`` is empty.
        DimensionMismatchError: When a feedback vector differs in dimension from ``q``.
    """
    query = np.asarray(q, dtype=np.float64)
    if len(feedback) == 0:
        raise EmptyInputError("pseudo-relevance feedback needs at least one passage")
    vectors = [np.asarray(v, dtype=np.float64) for v in feedback]
    for i, vector in enumerate(vectors):
        if vector.shape != query.shape:
            raise DimensionMismatchError(
                f"feedback vector {i} has shape {vector.shape}, query has {query.shape}"
            )
    stacked = np.stack(vectors)
    if Aggregation(aggregation) == Aggregation.SUM:
        signal = stacked.sum(axis=0)
    else:
        signal = stacked.sum(axis=0) / len(vectors)
    return alpha * query + beta * signal


def select_feedback(ranked: ScoredList, k: int) -> List[str]:
    """
    The first ``min(k, len(ranked))`` passage ids, in rank order.

    Raises:
        EmptyInputError: When ``ranked`` is empty.
    """
    if k < 1:
        raise ValueError(f"feedback depth must be positive, got {k}")
    if not ranked.entries:
        raise EmptyInputError(f"no feedback passages for query '{ranked.query_id}'")
    return ranked.ids()[:k]
