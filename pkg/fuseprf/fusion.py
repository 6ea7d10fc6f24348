"""Linear interpolation of sparse and dense ranked lists."""

import logging
from typing import Dict, Union

from .errors import QueryMismatchError
from .schemas import FusionConfig, MissingPolicy, Normalization, ScoredList

logger = logging.getLogger("fuseprf_logger")


def normalize(ranked: ScoredList, mode: Union[str, Normalization]) -> ScoredList:
    """
    Rescale the scores of one list; order is unchanged.

    MINMAX maps max -> 1 and min -> 0, and maps a list of equal scores to 1.0.
    NONE returns the list as is. Empty lists come back empty.
    """
    mode = Normalization(mode)
    if mode == Normalization.NONE or not ranked.entries:
        return ScoredList(ranked.query_id, ranked.entries)
    scores = ranked.scores()
    low, high = min(scores), max(scores)
    if high == low:
        return ScoredList(ranked.query_id, [(pid, 1.0) for pid, _ in ranked.entries])
    span = high - low
    return ScoredList(ranked.query_id, [(pid, (s - low) / span) for pid, s in ranked.entries])


def interpolate(sparse: ScoredList, dense: ScoredList, cfg: FusionConfig) -> ScoredList:
    """
    Fuse two lists of the same query: s(p) = lambda * sparse(p) + (1 - lambda) * dense(p).

    Under MIN_SUBSTITUTE the candidate set is the union of both lists and a
    passage missing from one list takes that list's normalised minimum (0.0 for
    an empty list). Under SKIP only passages present in both lists survive.

    Raises:
        QueryMismatchError: When the lists belong to different queries.
    """
    if sparse.query_id != dense.query_id:
        raise QueryMismatchError(
            f"cannot fuse lists of queries '{sparse.query_id}' and '{dense.query_id}'"
        )
    sparse_scores = normalize(sparse, cfg.normalization).as_dict()
    dense_scores = normalize(dense, cfg.normalization).as_dict()
    weight = cfg.lambda_

    if cfg.missing_policy == MissingPolicy.SKIP:
        candidates = [pid for pid in sparse_scores if pid in dense_scores]
        sparse_floor = dense_floor = 0.0
    else:
        candidates = list(sparse_scores) + [pid for pid in dense_scores if pid not in sparse_scores]
        sparse_floor = min(sparse_scores.values()) if sparse_scores else 0.0
        dense_floor = min(dense_scores.values()) if dense_scores else 0.0

    fused: Dict[str, float] = {}
    for pid in candidates:
        s = sparse_scores.get(pid, sparse_floor)
        d = dense_scores.get(pid, dense_floor)
        fused[pid] = weight * s + (1.0 - weight) * d
    logger.debug(
        f"Fused query {sparse.query_id}: {len(sparse_scores)} sparse, "
        f"{len(dense_scores)} dense, {len(fused)} candidates"
    )
    return ScoredList.from_scores(sparse.query_id, fused, cfg.output_depth)
