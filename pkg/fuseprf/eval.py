"""
Ranked-retrieval metrics and paired significance testing.

MAP and recall use binary relevance at grade >= 2; nDCG uses the raw graded
labels. Queries without any relevant passage are left out of a metric's mean;
judged queries absent from the run score 0 and stay in.
"""

import json
import logging
import math
import re
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .corpus_io import group_run
from .errors import ConfigError, EmptyInputError, QueryMismatchError
from .schemas import Gain, MetricReport, Qrels, RunEntry, SignificanceResult

logger = logging.getLogger("fuseprf_logger")

RELEVANCE_THRESHOLD = 2
DEFAULT_METRICS = "map,ndcg@10,recall@1000"
_METRIC_PATTERN = re.compile(r"^(map|ndcg|recall)(?:@(\d+))?$")


def binarize(qrels: Qrels, threshold: int = RELEVANCE_THRESHOLD) -> Qrels:
    """Map grades >= ``threshold`` to 1 and everything else to 0."""
    return {
        query_id: {pid: int(grade >= threshold) for pid, grade in judged.items()}
        for query_id, judged in qrels.items()
    }


def _ranked_ids(run: Sequence[RunEntry]) -> List[str]:
    return [entry.passage_id for entry in sorted(run, key=lambda e: e.rank)]


def average_precision(run: Sequence[RunEntry], qrels: Mapping[str, int]) -> float:
    """
    Average precision of one query's run against binary judgments.

    Returns 0.0 when the query has no relevant passage; callers exclude such
    queries from means.
    """
    relevant = {pid for pid, rel in qrels.items() if rel > 0}
    if not relevant:
        return 0.0
    found, total = 0, 0.0
    for i, pid in enumerate(_ranked_ids(run), start=1):
        if pid in relevant:
            found += 1
            total += found / i
    return total / len(relevant)


def _gain(grade: int, gain: Gain) -> float:
    if grade <= 0:
        return 0.0
    return float(2**grade - 1) if gain == Gain.EXPONENTIAL else float(grade)


def ndcg_at(
    run: Sequence[RunEntry],
    qrels: Mapping[str, int],
    cutoff: int = 10,
    gain: Union[str, Gain] = Gain.LINEAR,
) -> float:
    """nDCG@cutoff with log2(rank + 1) discount; 0.0 when the ideal DCG is 0."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    gain = Gain(gain)
    dcg = sum(
        _gain(qrels.get(pid, 0), gain) / math.log2(i + 1)
        for i, pid in enumerate(_ranked_ids(run)[:cutoff], start=1)
    )
    ideal = sorted((g for g in qrels.values() if g > 0), reverse=True)[:cutoff]
    idcg = sum(_gain(g, gain) / math.log2(i + 1) for i, g in enumerate(ideal, start=1))
    return dcg / idcg if idcg > 0 else 0.0


def recall_at(run: Sequence[RunEntry], qrels: Mapping[str, int], cutoff: int = 1000) -> float:
    """Fraction of relevant passages found in the top ``cutoff`` of the run."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be positive, got {cutoff}")
    relevant = {pid for pid, rel in qrels.items() if rel > 0}
    if not relevant:
        return 0.0
    retrieved = set(_ranked_ids(run)[:cutoff])
    return len(relevant & retrieved) / len(relevant)


def parse_metrics(spec: str) -> List[Tuple[str, Optional[int]]]:
    """Parse ``map,ndcg@10,recall@1000`` into (name, cutoff) pairs."""
    metrics = []
    for token in (t.strip().lower() for t in spec.split(",")):
        if not token:
            continue
        match = _METRIC_PATTERN.match(token)
        if not match:
            raise ConfigError(f"unknown metric '{token}'")
        name, cutoff = match.group(1), match.group(2)
        if cutoff is not None and int(cutoff) < 1:
            raise ConfigError(f"metric cutoff must be positive in '{token}'")
        if name in ("ndcg", "recall") and cutoff is None:
            cutoff = "10" if name == "ndcg" else "1000"
        metrics.append((name, int(cutoff) if cutoff is not None else None))
    if not metrics:
        raise ConfigError("no metrics requested")
    return metrics


def evaluate_run(
    run: Iterable[RunEntry],
    qrels: Qrels,
    metrics: Union[str, Sequence[Tuple[str, Optional[int]]]] = DEFAULT_METRICS,
    gain: Union[str, Gain] = Gain.LINEAR,
    threshold: int = RELEVANCE_THRESHOLD,
) -> List[MetricReport]:
    """
    Evaluate a run against graded qrels.

    Args:
        run: Run entries for any number of queries.
        qrels: Graded judgments (0..3).
        metrics: Metric spec string or parsed (name, cutoff) pairs.
        gain: nDCG gain, linear (raw grade) or exponential.
        threshold: Minimum grade counted relevant by MAP and recall.

    Returns:
        List[MetricReport]: One report per metric, per-query values keyed by
        sorted query id.
    """
    if isinstance(metrics, str):
        metrics = parse_metrics(metrics)
    by_query = group_run(run)
    binary = binarize(qrels, threshold)
    reports = []
    for name, cutoff in metrics:
        per_query: Dict[str, float] = {}
        for query_id in sorted(qrels):
            entries = by_query.get(query_id, [])
            if name == "ndcg":
                if not any(g > 0 for g in qrels[query_id].values()):
                    continue
                per_query[query_id] = ndcg_at(entries, qrels[query_id], cutoff, gain)
                continue
            if not any(binary[query_id].values()):
                continue
            if name == "map":
                ranked = sorted(entries, key=lambda e: e.rank)
                if cutoff is not None:
                    ranked = ranked[:cutoff]
                per_query[query_id] = average_precision(ranked, binary[query_id])
            else:
                per_query[query_id] = recall_at(entries, binary[query_id], cutoff)
        mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
        reports.append(MetricReport(metric_name=name, cutoff=cutoff, per_query=per_query, mean=mean))
    unjudged = [q for q in by_query if q not in qrels]
    if unjudged:
        logger.debug(f"{len(unjudged)} run queries have no judgments and were ignored")
    return reports


def paired_t_test(a: Mapping[str, float], b: Mapping[str, float]) -> SignificanceResult:
    """
    Two-tailed paired t-test over per-query values aligned by query id.

    All-zero differences give p = 1.0. Constant nonzero differences have zero
    variance; they are reported with p = 0.0 and ``degenerate`` set.

    Raises:
        QueryMismatchError: When the two query sets differ.
        EmptyInputError: With fewer than two queries.
    """
    if set(a) != set(b):
        raise QueryMismatchError("paired test needs the same query set on both sides")
    query_ids = sorted(a)
    if len(query_ids) < 2:
        raise EmptyInputError("paired test needs at least two queries")
    x = np.array([a[q] for q in query_ids], dtype=np.float64)
    y = np.array([b[q] for q in query_ids], dtype=np.float64)
    differences = x - y
    n = len(query_ids)
    if np.all(differences == 0.0):
        return SignificanceResult(p_value=1.0, statistic=0.0, n=n)
    if np.all(differences == differences[0]):
        logger.warning("Paired differences are constant and nonzero; reporting p = 0")
        return SignificanceResult(p_value=0.0, statistic=None, n=n, degenerate=True)
    result = stats.ttest_rel(x, y)
    p_value = min(1.0, max(0.0, float(result.pvalue)))
    return SignificanceResult(p_value=p_value, statistic=float(result.statistic), n=n)


def compare_reports(
    a: Sequence[MetricReport], b: Sequence[MetricReport]
) -> Dict[str, SignificanceResult]:
    """Paired t-test per metric between two evaluations over the same qrels."""
    results = {}
    for left, right in zip(a, b):
        if left.label != right.label:
            raise QueryMismatchError(f"metric '{left.label}' is paired with '{right.label}'")
        if len(left.per_query) < 2:
            continue
        results[left.label] = paired_t_test(left.per_query, right.per_query)
    return results


def _p_cell(result: Optional[SignificanceResult], width: int) -> str:
    # degenerate p-values are flagged with a star
    text = "-" if result is None else f"{result.p_value:.4f}" + ("*" if result.degenerate else "")
    return text.rjust(width)


def format_table(
    rows: Sequence[Tuple[str, Sequence[MetricReport]]],
    significance: Optional[Mapping[str, SignificanceResult]] = None,
) -> str:
    """Aligned text table: one row per run, one column per metric mean."""
    if not rows:
        return ""
    labels = [report.label for report in rows[0][1]]
    name_width = max(len("run"), *(len(name) for name, _ in rows))
    widths = [max(len(label), 6) for label in labels]
    lines = ["  ".join(["run".ljust(name_width)] + [l.rjust(w) for l, w in zip(labels, widths)])]
    for name, reports in rows:
        cells = [f"{r.mean:.4f}".rjust(w) for r, w in zip(reports, widths)]
        lines.append("  ".join([name.ljust(name_width)] + cells))
    if significance:
        cells = [_p_cell(significance.get(label), width) for label, width in zip(labels, widths)]
        lines.append("  ".join(["p-value".ljust(name_width)] + cells))
    return "\n".join(lines)


def report_records(run_name: str, reports: Sequence[MetricReport]) -> List[dict]:
    """JSON-lines records: per-query values, then the mean under query id 'all'."""
    records = []
    for report in reports:
        for query_id, value in report.per_query.items():
            records.append(
                {"run": run_name, "metric": report.label, "query_id": query_id, "value": value}
            )
        records.append(
            {
                "run": run_name,
                "metric": report.label,
                "query_id": "all",
                "value": report.mean,
                "num_q": len(report.per_query),
            }
        )
    return records


def write_report(path: str, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True))
            f.write("\n")


def format_comparisons(
    comparisons: Sequence[Tuple[str, Mapping[str, SignificanceResult]]],
    labels: Sequence[str],
) -> str:
    """Aligned p-value table: one row per compared pair, one column per metric."""
    if not comparisons:
        return ""
    name_width = max(len("comparison"), *(len(name) for name, _ in comparisons))
    widths = [max(len(label), 7) for label in labels]
    lines = ["  ".join(["comparison".ljust(name_width)] + [l.rjust(w) for l, w in zip(labels, widths)])]
    for name, results in comparisons:
        cells = [_p_cell(results.get(label), width) for label, width in zip(labels, widths)]
        lines.append("  ".join([name.ljust(name_width)] + cells))
    return "\n".join(lines)
