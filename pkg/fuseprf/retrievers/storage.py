"""On-disk layout shared by the sparse indexes.

An index directory holds ``manifest.json`` (format name, version, counts),
``documents.jsonl`` (one ``[passage_id, length]`` array per ordinal) and
``postings.jsonl`` (one ``{"term": ..., "postings": [[ordinal, value], ...]}``
object per term, terms sorted). JSON floats round-trip exactly.
"""

import json
import os
from typing import Any, Dict, Iterator, List, Tuple

from ..errors import IndexFormatError

MANIFEST = "manifest.json"
DOCUMENTS = "documents.jsonl"
POSTINGS = "postings.jsonl"


def write_index_files(
    directory: str,
    manifest: Dict[str, Any],
    documents: List[Tuple[str, int]],
    postings: Dict[str, List[Tuple[int, Any]]],
) -> None:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, MANIFEST), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    with open(os.path.join(directory, DOCUMENTS), "w", encoding="utf-8") as f:
        for passage_id, length in documents:
            f.write(json.dumps([passage_id, length], ensure_ascii=False))
            f.write("\n")
    with open(os.path.join(directory, POSTINGS), "w", encoding="utf-8") as f:
        for term in sorted(postings):
            record = {"term": term, "postings": [list(p) for p in postings[term]]}
            f.write(json.dumps(record, ensure_ascii=False))
            f.write("\n")


def read_manifest(directory: str, expected_format: str, expected_version: int) -> Dict[str, Any]:
    path = os.path.join(directory, MANIFEST)
    if not os.path.exists(path):
        raise IndexFormatError(f"{directory} has no {MANIFEST}")
    with open(path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format") != expected_format:
        raise IndexFormatError(
            f"{directory} holds a '{manifest.get('format')}' index, expected '{expected_format}'"
        )
    if manifest.get("version") != expected_version:
        raise IndexFormatError(
            f"{directory} has format version {manifest.get('version')}, "
            f"this build reads version {expected_version}"
        )
    return manifest


def read_documents(directory: str) -> Iterator[Tuple[str, int]]:
    with open(os.path.join(directory, DOCUMENTS), "r", encoding="utf-8") as f:
        for line in f:
            passage_id, length = json.loads(line)
            yield passage_id, length


def read_postings(directory: str) -> Iterator[Tuple[str, List[list]]]:
    with open(os.path.join(directory, POSTINGS), "r", encoding="utf-8") as f:
        for line in f:
            record = json.loads(line)
            yield record["term"], record["postings"]
