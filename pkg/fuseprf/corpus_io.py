"""
Readers and writers for every external file format.

Corpus: JSON lines with ``id`` and ``contents``. Queries: TSV ``id<TAB>text``.
Qrels: ``qid iter docid grade``. Runs: ``qid Q0 docid rank score tag``.
Vectors: text ``id v1 ... vd`` or binary records (little-endian uint32 id
length, utf-8 id, ``dim`` float32 values). Term weights: JSON lines with ``id``
and a ``vector`` object of term -> weight.

Every loader reports the 1-based line number of the first offending record.
"""

import json
import logging
import math
import os
import struct
from collections import defaultdict
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from .errors import DimensionMismatchError, DuplicateIdError, FormatError, GradeRangeError
from .schemas import MAX_GRADE, MIN_GRADE, Passage, Qrels, Query, RunEntry, TermWeightDoc

logger = logging.getLogger("fuseprf_logger")

_ID_LENGTH = struct.Struct("<I")


def _iter_lines(path: str) -> Iterator[Tuple[int, str]]:
    """Yields (line number, line without newline); rejects non-UTF-8 bytes."""
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise FormatError(f"invalid UTF-8: {e.reason}", path, line_no) from e
            yield line_no, line.rstrip("\r\n")


def _validation_message(error: ValidationError) -> str:
    first = error.errors()[0]
    field = ".".join(str(part) for part in first["loc"])
    return f"{field}: {first['msg']}" if field else first["msg"]


def load_corpus(path: str) -> List[Passage]:
    """
    Load a JSON-lines corpus.

    Args:
        path (str): File with one ``{"id": ..., "contents": ...}`` record per line.

    Returns:
        List[Passage]: Passages in file order.

    Raises:
        FormatError: On a malformed line.
        DuplicateIdError: When an id repeats.
    """
    passages: List[Passage] = []
    seen = set()
    for line_no, line in _iter_lines(path):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e.msg}", path, line_no) from e
        if not isinstance(record, dict) or "id" not in record or "contents" not in record:
            raise FormatError("record needs 'id' and 'contents' fields", path, line_no)
        if not isinstance(record["contents"], str):
            raise FormatError("'contents' must be a string", path, line_no)
        passage_id = str(record["id"])
        if not passage_id:
            raise FormatError("empty passage id", path, line_no)
        if passage_id in seen:
            raise DuplicateIdError(passage_id, path, line_no)
        seen.add(passage_id)
        passages.append(Passage(id=passage_id, text=record["contents"]))
    logger.info(f"Loaded {len(passages)} passages from {path}")
    return passages


def write_corpus(passages: Iterable[Passage], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for passage in passages:
            f.write(json.dumps({"id": passage.id, "contents": passage.text}, ensure_ascii=False))
            f.write("\n")


def load_queries(path: str) -> List[Query]:
    """Load a TSV query file (``id<TAB>text``), keeping file order."""
    queries: List[Query] = []
    seen = set()
    for line_no, line in _iter_lines(path):
        if "\t" not in line:
            raise FormatError("expected 'id<TAB>text'", path, line_no)
        query_id, text = line.split("\t", 1)
        if not query_id:
            raise FormatError("empty query id", path, line_no)
        if query_id in seen:
            raise DuplicateIdError(query_id, path, line_no)
        seen.add(query_id)
        queries.append(Query(id=query_id, text=text))
    logger.info(f"Loaded {len(queries)} queries from {path}")
    return queries


def write_queries(queries: Iterable[Query], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for query in queries:
            f.write(f"{query.id}\t{query.text}\n")


def load_qrels(path: str) -> Qrels:
    """
    Load TREC qrels (``qid iter docid grade``); the iter column is ignored.

    Raises:
        FormatError: On a wrong field count or a non-integer grade.
        GradeRangeError: On a grade outside 0..3.
        DuplicateIdError: When a (query, passage) pair is judged twice.
    """
    qrels: Qrels = defaultdict(dict)
    for line_no, line in _iter_lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"expected 4 fields, got {len(parts)}", path, line_no)
        query_id, _iteration, passage_id, grade_text = parts
        try:
            grade = int(grade_text)
        except ValueError as e:
            raise FormatError(f"grade '{grade_text}' is not an integer", path, line_no) from e
        if not MIN_GRADE <= grade <= MAX_GRADE:
            raise GradeRangeError(
                f"grade {grade} outside {MIN_GRADE}..{MAX_GRADE}", path, line_no
            )
        if passage_id in qrels[query_id]:
            raise DuplicateIdError(f"{query_id}/{passage_id}", path, line_no)
        qrels[query_id][passage_id] = grade
    return dict(qrels)


def write_qrels(qrels: Qrels, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for query_id, judged in qrels.items():
            for passage_id, grade in judged.items():
                f.write(f"{query_id} 0 {passage_id} {grade}\n")


def write_run(entries: Sequence[RunEntry], path: str) -> None:
    """Write TREC run lines ``qid Q0 docid rank score tag`` with 6-decimal scores."""
    with open(path, "w", encoding="utf-8") as f:
        for entry in entries:
            f.write(entry.to_line())
            f.write("\n")
    logger.info(f"Wrote {len(entries)} run entries to {path}")


def load_run(path: str) -> List[RunEntry]:
    """
    Load a TREC run file.

    Within each query ranks must run 1..n without gaps, scores must not increase
    with rank and a passage may appear once.
    """
    entries: List[RunEntry] = []
    last: Dict[str, RunEntry] = {}
    seen: Dict[str, set] = defaultdict(set)
    for line_no, line in _iter_lines(path):
        parts = line.split()
        if len(parts) != 6:
            raise FormatError(f"expected 6 fields, got {len(parts)}", path, line_no)
        query_id, _q0, passage_id, rank_text, score_text, tag = parts
        try:
            entry = RunEntry(
                query_id=query_id,
                passage_id=passage_id,
                rank=int(rank_text),
                score=float(score_text),
                tag=tag,
            )
        except (ValueError, ValidationError) as e:
            message = _validation_message(e) if isinstance(e, ValidationError) else str(e)
            raise FormatError(f"bad rank or score: {message}", path, line_no) from e
        if not math.isfinite(entry.score):
            raise FormatError("score is not finite", path, line_no)
        previous = last.get(query_id)
        expected_rank = previous.rank + 1 if previous else 1
        if entry.rank != expected_rank:
            raise FormatError(
                f"rank {entry.rank} for query '{query_id}', expected {expected_rank}",
                path,
                line_no,
            )
        if previous and entry.score > previous.score:
            raise FormatError(f"score increases with rank for query '{query_id}'", path, line_no)
        if passage_id in seen[query_id]:
            raise DuplicateIdError(f"{query_id}/{passage_id}", path, line_no)
        seen[query_id].add(passage_id)
        last[query_id] = entry
        entries.append(entry)
    return entries


def group_run(entries: Iterable[RunEntry]) -> Dict[str, List[RunEntry]]:
    """Groups run entries by query id, keeping first-seen query order."""
    grouped: Dict[str, List[RunEntry]] = {}
    for entry in entries:
        grouped.setdefault(entry.query_id, []).append(entry)
    return grouped


def _parse_vector(values: Sequence[str], path: str, line_no: int) -> np.ndarray:
    try:
        vector = np.array([float(v) for v in values], dtype=np.float32)
    except ValueError as e:
        raise FormatError(f"non-numeric vector value: {e}", path, line_no) from e
    if not np.all(np.isfinite(vector)):
        raise FormatError("vector has non-finite values", path, line_no)
    return vector


def load_vectors(path: str, dim: int, binary: bool = False) -> Dict[str, np.ndarray]:
    """
    Load dense vectors keyed by id.

    Args:
        path (str): Vector file.
        dim (int): Expected dimension of every vector.
        binary (bool): Read the binary record format instead of text.

    Returns:
        Dict[str, np.ndarray]: float32 vectors of length ``dim`` in file order.

    Raises:
        DimensionMismatchError: When a record has the wrong number of values.
        DuplicateIdError: When an id repeats.
    """
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    if binary:
        return _load_binary_vectors(path, dim)
    vectors: Dict[str, np.ndarray] = {}
    for line_no, line in _iter_lines(path):
        parts = line.split()
        if not parts:
            raise FormatError("empty line", path, line_no)
        record_id, values = parts[0], parts[1:]
        if len(values) != dim:
            raise DimensionMismatchError(
                f"{path}:{line_no}: vector '{record_id}' has {len(values)} values, expected {dim}"
            )
        if record_id in vectors:
            raise DuplicateIdError(record_id, path, line_no)
        vectors[record_id] = _parse_vector(values, path, line_no)
    logger.info(f"Loaded {len(vectors)} vectors of dimension {dim} from {path}")
    return vectors


def _load_binary_vectors(path: str, dim: int) -> Dict[str, np.ndarray]:
    vectors: Dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        data = f.read()
    offset, record_no, width = 0, 0, 4 * dim
    while offset < len(data):
        record_no += 1
        if offset + _ID_LENGTH.size > len(data):
            raise FormatError("truncated id length", path, record_no)
        (id_length,) = _ID_LENGTH.unpack_from(data, offset)
        offset += _ID_LENGTH.size
        try:
            record_id = data[offset : offset + id_length].decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError("id is not UTF-8", path, record_no) from e
        offset += id_length
        if offset + width > len(data):
            raise DimensionMismatchError(
                f"{path}: record {record_no} '{record_id}' is shorter than {dim} values"
            )
        vector = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float32)
        offset += width
        if record_id in vectors:
            raise DuplicateIdError(record_id, path, record_no)
        if not np.all(np.isfinite(vector)):
            raise FormatError("vector has non-finite values", path, record_no)
        vectors[record_id] = vector
    return vectors


def write_vectors(vectors: Dict[str, np.ndarray], path: str, binary: bool = False) -> None:
    """Write vectors in the text format (``repr`` precision) or the binary format."""
    if binary:
        with open(path, "wb") as f:
            for record_id, vector in vectors.items():
                encoded = record_id.encode("utf-8")
                f.write(_ID_LENGTH.pack(len(encoded)))
                f.write(encoded)
                f.write(np.asarray(vector, dtype="<f4").tobytes())
        return
    with open(path, "w", encoding="utf-8") as f:
        for record_id, vector in vectors.items():
            values = " ".join(repr(float(v)) for v in np.asarray(vector, dtype=np.float32))
            f.write(f"{record_id} {values}\n")


def load_term_weights(path: str) -> Dict[str, TermWeightDoc]:
    """
    Load learned term weights: JSON lines ``{"id": ..., "vector": {term: weight}}``.

    Used both for passages (impact index input) and for queries.
    """
    docs: Dict[str, TermWeightDoc] = {}
    for line_no, line in _iter_lines(path):
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON: {e.msg}", path, line_no) from e
        if not isinstance(record, dict) or "id" not in record or "vector" not in record:
            raise FormatError("record needs 'id' and 'vector' fields", path, line_no)
        if not isinstance(record["vector"], dict):
            raise FormatError("'vector' must be an object", path, line_no)
        try:
            doc = TermWeightDoc(id=str(record["id"]), weights=record["vector"])
        except ValidationError as e:
            raise FormatError(_validation_message(e), path, line_no) from e
        if doc.id in docs:
            raise DuplicateIdError(doc.id, path, line_no)
        docs[doc.id] = doc
    logger.info(f"Loaded term weights for {len(docs)} records from {path}")
    return docs


def write_term_weights(docs: Iterable[TermWeightDoc], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            f.write(json.dumps({"id": doc.id, "vector": doc.weights}, ensure_ascii=False))
            f.write("\n")


def ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
