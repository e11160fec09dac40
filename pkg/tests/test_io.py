import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mlmcexp.errors import DimensionError, FormatError, UnsupportedInputError
from mlmcexp.io import (
    ResultRecord,
    read_matrix_market,
    read_result,
    read_vector,
    write_matrix_market,
    write_result,
    write_vector,
)
from mlmcexp.mlmc import mlmc
from mlmcexp.netgen import smallw
from mlmcexp.paths import Target
from mlmcexp.sparse import SparseMatrix, decompose


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_symmetric_file_is_expanded(tmp_path):
    p = _write(tmp_path, "a.mtx", "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 1\n2 1 3.5\n")
    a = read_matrix_market(p)
    np.testing.assert_array_equal(a.to_dense(), [[0, 3.5], [3.5, 0]])
    assert a.nnz == 2


def test_duplicates_summed_and_comments_skipped(tmp_path):
    p = _write(tmp_path, "a.mtx",
               "%%MatrixMarket matrix coordinate real general\n%x\n\n3 3 3\n1 2 1.0\n% mid\n1 2 2e0\n3 3 -1\n")
    np.testing.assert_array_equal(read_matrix_market(p).to_dense(), [[0, 3, 0], [0, 0, 0], [0, 0, -1]])


def test_integer_field_accepted(tmp_path):
    p = _write(tmp_path, "a.mtx", "%%MatrixMarket matrix coordinate integer general\n2 2 1\n1 1 4\n")
    assert read_matrix_market(p).to_dense()[0, 0] == 4.0


@pytest.mark.parametrize("text,line", [
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 3 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 x 1\n", 2),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1\n", 3),
    ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n", 3),
    ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1.0\n2 2 1.0\n", 4),
    ("MatrixMarket matrix coordinate real general\n2 2 0\n", 1),
])
def test_malformed_files_report_lines(tmp_path, text, line):
    p = _write(tmp_path, "bad.mtx", text)
    with pytest.raises(FormatError) as info:
        read_matrix_market(p)
    assert info.value.line == line
    assert f":{line}:" in str(info.value)


def test_pattern_and_array_unsupported(tmp_path):
    p = _write(tmp_path, "p.mtx", "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n")
    with pytest.raises(UnsupportedInputError, match="pattern"):
        read_matrix_market(p)
    p = _write(tmp_path, "q.mtx", "%%MatrixMarket matrix array real general\n1 1\n1.0\n")
    with pytest.raises(UnsupportedInputError):
        read_matrix_market(p)


def test_non_square_rejected(tmp_path):
    p = _write(tmp_path, "r.mtx", "%%MatrixMarket matrix coordinate real general\n2 3 0\n")
    with pytest.raises(DimensionError):
        read_matrix_market(p)


@given(arrays(np.float64, (5, 5), elements=st.floats(-1e300, 1e300, allow_nan=False)))
def test_matrix_round_trip(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("mm") / "a.mtx"
    m = SparseMatrix.from_dense(a)
    write_matrix_market(p, m)
    assert read_matrix_market(p) == m


def test_symmetric_round_trip(tmp_path):
    a = smallw(60, seed=2)
    write_matrix_market(tmp_path / "s.mtx", a, symmetric=True)
    assert read_matrix_market(tmp_path / "s.mtx") == a
    with pytest.raises(UnsupportedInputError):
        write_matrix_market(tmp_path / "t.mtx", SparseMatrix.from_dense([[0, 1], [0, 0]]), symmetric=True)


def test_vectors(tmp_path):
    p = _write(tmp_path, "v.txt", "1.0 2e-3\n# comment\n -4.5E+2  % trailing\n")
    np.testing.assert_array_equal(read_vector(p), [1.0, 2e-3, -450.0])
    with pytest.raises(DimensionError):
        read_vector(p, 4)
    with pytest.raises(FormatError):
        read_vector(_write(tmp_path, "e.txt", "\n  \n"))
    with pytest.raises(FormatError) as info:
        read_vector(_write(tmp_path, "b.txt", "1\n2\nthree\n"))
    assert info.value.line == 3


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_vector_round_trip(tmp_path_factory, v):
    p = tmp_path_factory.mktemp("v") / "v.txt"
    write_vector(p, v)
    np.testing.assert_array_equal(read_vector(p), v)


@pytest.fixture(scope="module")
def record():
    a = smallw(80, seed=1)
    r = mlmc(Target(decompose(a), np.ones(80), "entry", 0), 0.25, 2e-2, seed=3)
    return ResultRecord.from_mlmc(r, {"seed": 3, "beta": 0.25, "graph": "smallw"})


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_result_round_trip(tmp_path, record, fmt):
    p = tmp_path / f"r.{fmt}"
    write_result(record, p, fmt)
    back = read_result(p, fmt)
    assert back == record


def test_json_field_order(tmp_path, record):
    write_result(record, tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert list(d)[:4] == ["estimate", "statistical_error", "bias_estimate", "quadrature_error"]
    assert list(d["levels"][0]) == ["l", "dt", "M", "mean", "variance", "cost"]


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_empty_levels_and_nan(tmp_path, fmt):
    rec = ResultRecord(float("nan"), float("nan"), float("nan"), 0, 0.0, converged=False)
    p = tmp_path / f"n.{fmt}"
    write_result(rec, p, fmt)
    text = p.read_text()
    assert "NaN" not in text and "null" in text
    back = read_result(p, fmt)
    assert math.isnan(back.estimate) and back.levels == [] and back.converged is False
    if fmt == "json":
        assert json.loads(text)["estimate"] is None


def test_unknown_format(tmp_path, record):
    with pytest.raises(UnsupportedInputError):
        write_result(record, tmp_path / "r.xml", "xml")
