"""
Pydantic models and data structures for retrieval configuration and results.
"""

import hashlib
import heapq
import json
import math
from enum import Enum
from typing import Any, Dict, Iterator, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

# query-id -> passage-id -> grade
Qrels = Dict[str, Dict[str, int]]

DenseVector = np.ndarray

MIN_GRADE = 0
MAX_GRADE = 3


class Stage(str, Enum):
    """Where sparse/dense interpolation happens relative to feedback."""

    NONE = "none"
    FUSE = "fuse"
    PRE = "pre"
    POST = "post"
    BOTH = "both"


class Normalization(str, Enum):
    NONE = "none"
    MINMAX = "minmax"


class MissingPolicy(str, Enum):
    MIN_SUBSTITUTE = "min"
    SKIP = "skip"


class SparseBackend(str, Enum):
    BM25 = "bm25"
    IMPACT = "impact"


class Aggregation(str, Enum):
    MEAN = "mean"
    SUM = "sum"


class Similarity(str, Enum):
    INNER_PRODUCT = "ip"
    COSINE = "cosine"


class Gain(str, Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exp"


class Passage(BaseModel):
    """A corpus text unit."""

    id: str = Field(min_length=1, description="Passage id, unique within a corpus.")
    text: str = Field(default="", description="Passage contents.")


class Query(BaseModel):
    id: str = Field(min_length=1, description="Query id, unique within a query set.")
    text: str = Field(default="", description="Query text.")


class RunEntry(BaseModel):
    """One line of a TREC run file."""

    query_id: str = Field(min_length=1)
    passage_id: str = Field(min_length=1)
    rank: int = Field(ge=1)
    score: float
    tag: str = Field(default="fuseprf", min_length=1)

    def to_line(self) -> str:
        return f"{self.query_id} Q0 {self.passage_id} {self.rank} {self.score:.6f} {self.tag}"


class TermWeightDoc(BaseModel):
    """Precomputed learned term weights for one passage (or query)."""

    id: str = Field(min_length=1)
    weights: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_weights(self) -> "TermWeightDoc":
        for term, weight in self.weights.items():
            if not term:
                raise ValueError(f"empty term in weights of '{self.id}'")
            if not weight >= 0.0:
                raise ValueError(f"negative weight {weight} for term '{term}' in '{self.id}'")
        return self


class Bm25Params(BaseModel):
    """
    BM25 saturation and length normalisation parameters.

    Attributes:
        k1 (float): Term frequency saturation. Defaults to 0.9.
        b (float): Document length normalisation in [0, 1]. Defaults to 0.4.
    """

    k1: float = Field(default=0.9, ge=0.0, description="Term frequency saturation.")
    b: float = Field(default=0.4, ge=0.0, le=1.0, description="Length normalisation.")

    class Config:
        extra = "forbid"


class FusionConfig(BaseModel):
    """
    Configuration for sparse/dense score interpolation.

    Attributes:
        lambda_ (float): Weight of the sparse score, alias ``lambda``. Defaults to 0.5.
        normalization (Normalization): Per-list score normalisation. Defaults to min-max.
        missing_policy (MissingPolicy): How passages found by only one retriever are
            scored. Defaults to substituting the list minimum.
        output_depth (int): Length of the fused list. Defaults to 1000.
    """

    lambda_: float = Field(
        default=0.5,
        ge=0.0,
        le=1.0,
        alias="lambda",
        description="Contribution of the sparse score to the fused score.",
    )
    normalization: Normalization = Field(
        default=Normalization.MINMAX, description="Per-query score normalisation."
    )
    missing_policy: MissingPolicy = Field(
        default=MissingPolicy.MIN_SUBSTITUTE,
        description="Scoring of passages present in only one list.",
    )
    output_depth: int = Field(default=1000, ge=1, description="Fused list length.")

    class Config:
        extra = "forbid"
        populate_by_name = True


class PrfConfig(BaseModel):
    """
    Configuration for Rocchio vector pseudo-relevance feedback.

    Attributes:
        alpha (float): Weight of the original query vector. Defaults to 0.4.
        beta (float): Weight of the feedback vectors. Defaults to 0.6.
        depth_k (int): Number of feedback passages. Defaults to 3.
        aggregation (Aggregation): Feedback centroid (mean) or sum. Defaults to mean.
    """

    alpha: float = Field(default=0.4, description="Original query weight.")
    beta: float = Field(default=0.6, description="Feedback weight.")
    depth_k: int = Field(default=3, ge=1, description="Feedback depth.")
    aggregation: Aggregation = Field(
        default=Aggregation.MEAN, description="Aggregation of feedback vectors."
    )

    class Config:
        extra = "forbid"


class PipelineConfig(BaseModel):
    """
    Configuration of one retrieval pipeline variant.

    Attributes:
        stage (Stage): Interpolation placement. Defaults to none.
        use_prf (bool): Whether a second, feedback-driven dense round runs.
        use_dense (bool): Whether dense retrieval is used at all.
        fusion (FusionConfig): Interpolation settings.
        prf (PrfConfig): Feedback settings.
        bm25 (Bm25Params): BM25 parameters, used by the bm25 backend.
        retrieval_depth (int): Depth of every first- and second-round list.
        sparse_backend (SparseBackend): Which sparse retriever feeds fusion.
    """

    stage: Stage = Field(default=Stage.NONE, description="Interpolation placement.")
    use_prf: bool = Field(default=False, description="Run vector PRF.")
    use_dense: bool = Field(default=True, description="Use dense retrieval.")
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    prf: PrfConfig = Field(default_factory=PrfConfig)
    bm25: Bm25Params = Field(default_factory=Bm25Params)
    retrieval_depth: int = Field(default=1000, ge=1, description="Retrieval depth.")
    sparse_backend: SparseBackend = Field(
        default=SparseBackend.BM25, description="Sparse retriever."
    )

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _check_stage(self) -> "PipelineConfig":
        if self.stage in (Stage.PRE, Stage.POST, Stage.BOTH) and not self.use_prf:
            raise ValueError(f"stage '{self.stage.value}' requires use_prf")
        if self.stage == Stage.FUSE and self.use_prf:
            raise ValueError("stage 'fuse' interpolates without feedback; set use_prf off")
        if not self.use_dense and (self.stage != Stage.NONE or self.use_prf):
            raise ValueError("only the plain sparse run works without dense retrieval")
        if self.use_prf and self.retrieval_depth < self.prf.depth_k:
            raise ValueError(
                f"retrieval_depth {self.retrieval_depth} is smaller than prf depth {self.prf.depth_k}"
            )
        return self

    @property
    def needs_sparse(self) -> bool:
        return self.stage != Stage.NONE or not self.use_dense

    def prune(self) -> Dict[str, Any]:
        """Returns the JSON-compatible configuration, aliases applied."""
        return self.model_dump(mode="json", by_alias=True)

    def tag(self) -> str:
        """Returns a run tag that is identical for identical configurations."""
        canonical = json.dumps(self.prune(), sort_keys=True, separators=(",", ":"))
        digest = hashlib.sha1(canonical.encode("utf-8")).hexdigest()[:8]
        stage = self.stage.value
        if self.stage == Stage.NONE:
            stage = "vprf" if self.use_prf else ("dense" if self.use_dense else "sparse")
        return f"fuseprf-{stage}-{self.sparse_backend.value}-{digest}"


class SweepSpec(BaseModel):
    """A one-parameter sweep over pipeline settings."""

    parameter: Literal["lambda", "alpha", "beta", "prf_depth"]
    values: List[float] = Field(min_length=1)

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _check_values(self) -> "SweepSpec":
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly ascending")
        if self.parameter == "lambda" and any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ValueError("lambda values must lie in [0, 1]")
        if self.parameter == "prf_depth" and any(v < 1 or v != int(v) for v in self.values):
            raise ValueError("prf_depth values must be positive integers")
        return self

    def apply(self, base: PipelineConfig, value: float) -> PipelineConfig:
        """Returns a copy of ``base`` with the swept parameter set to ``value``."""
        data = base.prune()
        if self.parameter == "lambda":
            data["fusion"]["lambda"] = value
        elif self.parameter == "prf_depth":
            data["prf"]["depth_k"] = int(value)
        else:
            data["prf"][self.parameter] = value
        return PipelineConfig.model_validate(data)

    def label(self, value: float) -> str:
        if self.parameter == "prf_depth":
            return f"{self.parameter}-{int(value)}"
        return f"{self.parameter}-{value:g}"


class SearchRequest(BaseModel):
    """Body of ``POST /search``."""

    query_text: str = Field(default="", description="Query text for sparse retrieval.")
    query_id: str = Field(
        default="request",
        min_length=1,
        description="Query id; selects precomputed impact query weights when present.",
    )
    query_vector: Optional[List[float]] = Field(
        default=None, description="Dense query vector, required when dense retrieval runs."
    )
    overrides: Optional[Dict[str, Any]] = Field(
        default=None, description="Partial pipeline configuration applied over the server default."
    )

    @field_validator("query_vector")
    @classmethod
    def vector_is_finite(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and not math.isfinite(sum(v * v for v in value)):
            raise ValueError("query vector must be finite with a finite norm")
        return value


class MetricReport(BaseModel):
    """Per-query and mean values of one metric over one run."""

    metric_name: str
    cutoff: Optional[int] = None
    per_query: Dict[str, float] = Field(default_factory=dict)
    mean: float = 0.0

    @property
    def label(self) -> str:
        return f"{self.metric_name}@{self.cutoff}" if self.cutoff else self.metric_name


class SignificanceResult(BaseModel):
    """Outcome of a two-tailed paired t-test."""

    p_value: float = Field(ge=0.0, le=1.0)
    statistic: Optional[float] = None
    n: int
    degenerate: bool = Field(
        default=False,
        description="Differences have zero variance and nonzero mean; p is the limit value.",
    )


def ranking_key(item: Tuple[str, float]) -> Tuple[float, str]:
    """Sort key of the total order used by every ranked list: score desc, id asc."""
    return (-item[1], item[0])


class ScoredList:
    """
    A per-query ranked list of (passage id, score) pairs.

    Scores are non-increasing and ties are ordered by ascending passage id, so
    every list built through ``from_scores`` is fully deterministic.

    Attributes:
        query_id (str): The query the list belongs to.
        entries (List[Tuple[str, float]]): Ranked (passage id, score) pairs.
    """

    def __init__(self, query_id: str, entries: Sequence[Tuple[str, float]] = ()):
        self.query_id = query_id
        self.entries: List[Tuple[str, float]] = [(pid, float(score)) for pid, score in entries]

    @classmethod
    def from_scores(
        cls, query_id: str, scores: Mapping[str, float], depth: Optional[int] = None
    ) -> "ScoredList":
        """Ranks a passage -> score mapping, keeping the top ``depth`` entries."""
        items = [(pid, float(score)) for pid, score in scores.items()]
        if depth is None or depth >= len(items):
            ranked = sorted(items, key=ranking_key)
        else:
            ranked = heapq.nsmallest(depth, items, key=ranking_key)
        return cls(query_id, ranked)

    def ids(self) -> List[str]:
        return [pid for pid, _ in self.entries]

    def scores(self) -> List[float]:
        return [score for _, score in self.entries]

    def as_dict(self) -> Dict[str, float]:
        return dict(self.entries)

    def check(self) -> None:
        """Raises ValueError when the ordering invariants do not hold."""
        seen = set()
        for i, (pid, _score) in enumerate(self.entries):
            if pid in seen:
                raise ValueError(f"passage '{pid}' listed twice for query '{self.query_id}'")
            seen.add(pid)
            if i and ranking_key(self.entries[i - 1]) > ranking_key(self.entries[i]):
                raise ValueError(f"list for query '{self.query_id}' is out of order at {i}")

    def to_run_entries(self, tag: str) -> List[RunEntry]:
        return [
            RunEntry(query_id=self.query_id, passage_id=pid, rank=rank, score=score, tag=tag)
            for rank, (pid, score) in enumerate(self.entries, start=1)
        ]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[str, float]]:
        return iter(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScoredList):
            return NotImplemented
        return self.query_id == other.query_id and self.entries == other.entries

    def __repr__(self):
        head = ", ".join(f"({pid}, {score:.4f})" for pid, score in self.entries[:5])
        more = f", ... {len(self.entries) - 5} more" if len(self.entries) > 5 else ""
        return f"ScoredList(query_id={self.query_id}, entries=[{head}{more}])"


class PipelineResult:
    """
    Full trace of one query through a pipeline.

    Attributes:
        final (ScoredList): The list the pipeline returns.
        round1_dense (Optional[ScoredList]): First dense round, when dense is used.
        round1_sparse (Optional[ScoredList]): Sparse run, when the stage needs it.
        round1_fused (Optional[ScoredList]): Fused first round, for pre and both.
        prf_query (Optional[np.ndarray]): Feedback query vector, when PRF ran.
        round2_dense (Optional[ScoredList]): Second dense round, when PRF ran.
        feedback_ids (List[str]): Passages used as feedback.
        query_weight_source (str): Origin of impact query weights: file, tf or none.
    """

    def __init__(
        self,
        final: ScoredList,
        round1_dense: Optional[ScoredList] = None,
        round1_sparse: Optional[ScoredList] = None,
        round1_fused: Optional[ScoredList] = None,
        prf_query: Optional[np.ndarray] = None,
        round2_dense: Optional[ScoredList] = None,
        feedback_ids: Optional[List[str]] = None,
        query_weight_source: str = "none",
    ):
        self.final = final
        self.round1_dense = round1_dense
        self.round1_sparse = round1_sparse
        self.round1_fused = round1_fused
        self.prf_query = prf_query
        self.round2_dense = round2_dense
        self.feedback_ids = feedback_ids or []
        self.query_weight_source = query_weight_source

    def __repr__(self):
        return (
            f"PipelineResult(final={self.final}, round1_dense={self.round1_dense}, "
            f"round1_sparse={self.round1_sparse}, round1_fused={self.round1_fused}, "
            f"feedback_ids={self.feedback_ids}, round2_dense={self.round2_dense}, "
            f"query_weight_source={self.query_weight_source})"
        )


ConfigLike = Union[Dict[str, Any], PipelineConfig, None]
