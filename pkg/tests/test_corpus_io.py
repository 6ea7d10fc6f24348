import numpy as np
import pytest

from fuseprf.corpus_io import (
    group_run,
    load_corpus,
    load_qrels,
    load_queries,
    load_run,
    load_term_weights,
    load_vectors,
    write_corpus,
    write_run,
    write_vectors,
)
from fuseprf.errors import (
    DimensionMismatchError,
    DuplicateIdError,
    FormatError,
    GradeRangeError,
)
from fuseprf.schemas import Passage, RunEntry
from tests.conftest import tiny_path


def _write(tmp_path, name, text, mode="w"):
    path = tmp_path / name
    if mode == "wb":
        path.write_bytes(text)
    else:
        path.write_text(text, encoding="utf-8")
    return str(path)


def test_tiny_fixture_loads(tiny_corpus, tiny_queries, tiny_qrels):
    assert [p.id for p in tiny_corpus] == ["d1", "d2", "d3", "d4", "d5", "d6"]
    assert [(q.id, q.text) for q in tiny_queries] == [
        ("q1", "cats and mice"),
        ("q2", "cheese in the kitchen"),
    ]
    assert tiny_qrels["q1"] == {"d1": 3, "d4": 2, "d2": 1, "d3": 0}


def test_corpus_write_then_load(tmp_path):
    passages = [Passage(id="a", text="héllo wörld"), Passage(id="b", text="")]
    path = str(tmp_path / "corpus.jsonl")
    write_corpus(passages, path)
    assert load_corpus(path) == passages


def test_corpus_duplicate_id_reports_line(tmp_path):
    path = _write(
        tmp_path,
        "c.jsonl",
        '{"id": "a", "contents": "x"}\n{"id": "b", "contents": "y"}\n{"id": "a", "contents": "z"}\n',
    )
    with pytest.raises(DuplicateIdError) as excinfo:
        load_corpus(path)
    assert excinfo.value.line_no == 3
    assert excinfo.value.record_id == "a"
    assert ":3:" in str(excinfo.value)


def test_corpus_invalid_utf8_reports_line(tmp_path):
    path = _write(tmp_path, "c.jsonl", b'{"id": "a", "contents": "x"}\n\xff\xfe\n', mode="wb")
    with pytest.raises(FormatError) as excinfo:
        load_corpus(path)
    assert excinfo.value.line_no == 2


def test_corpus_missing_field(tmp_path):
    path = _write(tmp_path, "c.jsonl", '{"id": "a"}\n')
    with pytest.raises(FormatError, match="contents"):
        load_corpus(path)


def test_queries_need_a_tab(tmp_path):
    path = _write(tmp_path, "q.tsv", "q1\tfine\nq2 no tab here\n")
    with pytest.raises(FormatError) as excinfo:
        load_queries(path)
    assert excinfo.value.line_no == 2


def test_qrels_grade_out_of_range(tmp_path):
    path = _write(tmp_path, "qrels.txt", "q1 0 d1 2\nq1 0 d2 4\n")
    with pytest.raises(GradeRangeError) as excinfo:
        load_qrels(path)
    assert excinfo.value.line_no == 2


def test_qrels_wrong_field_count(tmp_path):
    path = _write(tmp_path, "qrels.txt", "q1 0 d1\n")
    with pytest.raises(FormatError, match="4 fields"):
        load_qrels(path)


def test_qrels_duplicate_pair(tmp_path):
    path = _write(tmp_path, "qrels.txt", "q1 0 d1 1\nq2 0 d1 1\nq1 0 d1 2\n")
    with pytest.raises(DuplicateIdError):
        load_qrels(path)


def test_run_lines_are_bit_exact(tmp_path):
    entries = [
        RunEntry(query_id="q1", passage_id="d1", rank=1, score=1.23456789, tag="t"),
        RunEntry(query_id="q1", passage_id="d2", rank=2, score=-0.5, tag="t"),
    ]
    path = str(tmp_path / "run.txt")
    write_run(entries, path)
    with open(path, "r", encoding="utf-8") as f:
        assert f.read() == "q1 Q0 d1 1 1.234568 t\nq1 Q0 d2 2 -0.500000 t\n"


def test_sample_run_loads_and_groups():
    grouped = group_run(load_run(tiny_path("sample_run.txt")))
    assert list(grouped) == ["q1", "q2"]
    assert [e.passage_id for e in grouped["q2"]] == ["d6", "d1", "d5"]


@pytest.mark.parametrize(
    "text, message",
    [
        ("q1 Q0 d1 2 1.0 t\n", "expected 1"),
        ("q1 Q0 d1 1 1.0 t\nq1 Q0 d2 2 2.0 t\n", "score increases"),
        ("q1 Q0 d1 1 1.0 t\nq1 Q0 d2 3 0.5 t\n", "expected 2"),
        ("q1 Q0 d1 1 nan t\n", "not finite"),
        ("q1 Q0 d1 1 1.0\n", "6 fields"),
    ],
)
def test_run_validation(tmp_path, text, message):
    path = _write(tmp_path, "run.txt", text)
    with pytest.raises(FormatError, match=message):
        load_run(path)


def test_run_duplicate_passage(tmp_path):
    path = _write(tmp_path, "run.txt", "q1 Q0 d1 1 1.0 t\nq1 Q0 d1 2 0.5 t\n")
    with pytest.raises(DuplicateIdError):
        load_run(path)


def test_vectors_dimension_mismatch(tmp_path):
    path = _write(tmp_path, "v.txt", "a 1 2 3\nb 1 2\n")
    with pytest.raises(DimensionMismatchError, match=":2:"):
        load_vectors(path, 3)


def test_vectors_duplicate_id(tmp_path):
    path = _write(tmp_path, "v.txt", "a 1 2\na 3 4\n")
    with pytest.raises(DuplicateIdError):
        load_vectors(path, 2)


@pytest.mark.parametrize("binary", [False, True])
def test_vectors_text_and_binary_agree(tmp_path, binary):
    vectors = {"x": np.array([0.1, -2.5, 3.0], dtype=np.float32), "ÿ": np.zeros(3, dtype=np.float32)}
    path = str(tmp_path / "v.bin")
    write_vectors(vectors, path, binary=binary)
    loaded = load_vectors(path, 3, binary=binary)
    assert list(loaded) == ["x", "ÿ"]
    for key, vector in vectors.items():
        assert loaded[key].dtype == np.float32
        assert np.array_equal(loaded[key], vector)


def test_binary_vectors_truncated(tmp_path):
    path = str(tmp_path / "v.bin")
    write_vectors({"a": np.ones(4, dtype=np.float32)}, path, binary=True)
    with pytest.raises(DimensionMismatchError):
        load_vectors(path, 5, binary=True)


def test_term_weights(tmp_path):
    docs = load_term_weights(tiny_path("passage_weights.jsonl"))
    assert docs["d6"].weights == {"cheese": 1.4, "wine": 1.2, "pair": 0.2}
    path = _write(tmp_path, "w.jsonl", '{"id": "a", "vector": {"x": -1.0}}\n')
    with pytest.raises(FormatError, match="negative weight"):
        load_term_weights(path)


def test_thousand_generated_vector_records(tmp_path):
    rng = np.random.default_rng(31)
    rows = {f"v{i:04d}": [f"{x:.6f}" for x in rng.uniform(-5.0, 5.0, size=3)] for i in range(1000)}
    text = "".join(f"{pid} {' '.join(values)}\n" for pid, values in rows.items())
    loaded = load_vectors(_write(tmp_path, "thousand.txt", text), 3)
    assert len(loaded) == 1000
    assert list(loaded) == list(rows)
    for pid, values in rows.items():
        assert loaded[pid].shape == (3,)
        assert np.array_equal(loaded[pid], np.array([float(v) for v in values], dtype=np.float32))
