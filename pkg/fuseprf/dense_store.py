"""
Exact inner-product retrieval over fixed-dimension passage vectors.

Vectors are held as float32; scoring accumulates in float64 so that ties and
near-ties resolve identically on every run. Rows are kept in ascending id order,
which makes a stable argsort on the negated scores the full ranking order
(score desc, id asc).
"""

import logging
import struct
from typing import Dict, List, Mapping, Sequence, Union

import numpy as np

from .corpus_io import load_vectors
from .errors import DimensionMismatchError, IndexFormatError, MissingIdError
from .schemas import ScoredList, Similarity

logger = logging.getLogger("fuseprf_logger")

SNAPSHOT_MAGIC = b"FPRFDNSE"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<8sHII")
_ID_LENGTH = struct.Struct("<I")


class DenseStore:
    """
    Immutable store of passage vectors.

    Attributes:
        dim (int): Vector dimension.
        similarity (Similarity): Inner product (default) or cosine.
        ids (List[str]): Passage ids in ascending order.
    """

    def __init__(
        self,
        entries: Mapping[str, np.ndarray],
        dim: int,
        similarity: Union[str, Similarity] = Similarity.INNER_PRODUCT,
    ):
        if dim < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        self.dim = dim
        self.similarity = Similarity(similarity)
        self.ids: List[str] = sorted(entries)
        self._rows: Dict[str, int] = {pid: i for i, pid in enumerate(self.ids)}
        matrix = np.zeros((len(self.ids), dim), dtype=np.float32)
        for i, pid in enumerate(self.ids):
            vector = np.asarray(entries[pid], dtype=np.float32)
            if vector.shape != (dim,):
                raise DimensionMismatchError(
                    f"vector '{pid}' has shape {vector.shape}, expected ({dim},)"
                )
            matrix[i] = vector
        if not np.all(np.isfinite(matrix)):
            raise ValueError("dense store vectors must be finite")
        self.matrix = matrix
        self.matrix.setflags(write=False)
        scoring = matrix.astype(np.float64)
        if self.similarity == Similarity.COSINE:
            norms = np.linalg.norm(scoring, axis=1, keepdims=True)
            scoring = np.divide(scoring, norms, out=np.zeros_like(scoring), where=norms > 0)
        self._scoring = scoring
        self._scoring.setflags(write=False)

    @classmethod
    def from_vector_file(
        cls,
        path: str,
        dim: int,
        binary: bool = False,
        similarity: Union[str, Similarity] = Similarity.INNER_PRODUCT,
    ) -> "DenseStore":
        return cls(load_vectors(path, dim, binary=binary), dim, similarity)

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, passage_id: object) -> bool:
        return passage_id in self._rows

    def _check_query(self, q: Sequence[float]) -> np.ndarray:
        vector = np.asarray(q, dtype=np.float64)
        if vector.shape != (self.dim,):
            raise DimensionMismatchError(
                f"query vector has shape {vector.shape}, store dimension is {self.dim}"
            )
        if self.similarity == Similarity.COSINE:
            norm = np.linalg.norm(vector)
            if norm > 0:
                vector = vector / norm
        return vector

    def top_k(self, q: Sequence[float], depth: int, query_id: str = "") -> ScoredList:
        """
        Exact top-``depth`` passages by similarity to ``q``.

        Raises:
            DimensionMismatchError: When ``q`` does not match the store dimension.
        """
        if depth < 1:
            raise ValueError(f"depth must be positive, got {depth}")
        vector = self._check_query(q)
        if not self.ids:
            return ScoredList(query_id)
        scores = self._scoring @ vector
        order = np.argsort(-scores, kind="stable")[:depth]
        return ScoredList(query_id, [(self.ids[i], float(scores[i])) for i in order])

    def fetch_vectors(self, ids: Sequence[str]) -> List[np.ndarray]:
        """Vectors for ``ids`` in input order; raises MissingIdError for unknown ids."""
        vectors = []
        for pid in ids:
            row = self._rows.get(pid)
            if row is None:
                raise MissingIdError(pid, "passage vector")
            vectors.append(self.matrix[row])
        return vectors

    def save(self, path: str) -> None:
        """Write a binary snapshot: header (magic, version, dim, count), ids, float32 rows."""
        with open(path, "wb") as f:
            f.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, self.dim, len(self.ids)))
            for pid in self.ids:
                encoded = pid.encode("utf-8")
                f.write(_ID_LENGTH.pack(len(encoded)))
                f.write(encoded)
            f.write(self.matrix.astype("<f4").tobytes())
        logger.info(f"Saved dense store ({len(self.ids)} vectors, dim {self.dim}) to {path}")

    @classmethod
    def load(
        cls, path: str, similarity: Union[str, Similarity] = Similarity.INNER_PRODUCT
    ) -> "DenseStore":
        with open(path, "rb") as f:
            data = f.read()
        if len(data) < _HEADER.size:
            raise IndexFormatError(f"{path} is too short for a dense snapshot")
        magic, version, dim, count = _HEADER.unpack_from(data, 0)
        if magic != SNAPSHOT_MAGIC:
            raise IndexFormatError(f"{path} is not a dense snapshot")
        if version != SNAPSHOT_VERSION:
            raise IndexFormatError(
                f"{path} has snapshot version {version}, this build reads {SNAPSHOT_VERSION}"
            )
        offset = _HEADER.size
        ids = []
        try:
            for _ in range(count):
                (length,) = _ID_LENGTH.unpack_from(data, offset)
                offset += _ID_LENGTH.size
                if offset + length > len(data):
                    raise IndexFormatError(f"{path} ends inside passage id {len(ids)}")
                ids.append(data[offset : offset + length].decode("utf-8"))
                offset += length
        except (struct.error, UnicodeDecodeError) as e:
            raise IndexFormatError(f"{path} has a corrupt id table: {str(e)}") from e
        if len(set(ids)) != len(ids):
            raise IndexFormatError(f"{path} lists a passage id twice")
        expected = count * dim * 4
        if len(data) - offset != expected:
            raise IndexFormatError(f"{path} holds {len(data) - offset} vector bytes, expected {expected}")
        matrix = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset).reshape(count, dim)
        store = cls(dict(zip(ids, matrix.astype(np.float32))), dim, similarity)
        logger.info(f"Loaded dense store ({count} vectors, dim {dim}) from {path}")
        return store


def top_k(store: DenseStore, q: Sequence[float], depth: int, query_id: str = "") -> ScoredList:
    return store.top_k(q, depth, query_id)


def fetch_vectors(store: DenseStore, ids: Sequence[str]) -> List[np.ndarray]:
    return store.fetch_vectors(ids)
