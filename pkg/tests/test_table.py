import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tabdrw.table import (CATEGORICAL, CONTINUOUS, DISCRETE, ColumnKind, ColumnSchema, Table,
                          TableError, infer_schema, read_csv, read_schema, with_bounds_from_data,
                          write_csv, write_schema)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_inference_by_parseability(tmp_path):
    t = read_csv(_write(tmp_path / "a.csv", "a,b\n1.5,x\n2.25,y\n3.125,x\n"))
    assert [c.kind.kind for c in t.schema] == [CONTINUOUS, CATEGORICAL]
    assert t.schema[1].kind.codebook == ("x", "y")
    assert t.labels(1) == ["x", "y", "x"]


def test_integer_column_is_discrete(tmp_path):
    t = read_csv(_write(tmp_path / "a.csv", "a\n0\n1\n1\n0\n"))
    assert t.schema[0].kind == ColumnKind.discrete(0)


def test_bad_cell_in_declared_continuous_column_names_row_and_column(tmp_path):
    path = _write(tmp_path / "a.csv", "a\n1.0\nabc\n")
    with pytest.raises(TableError, match=r"row 2.*'a'|'a'.*row 2"):
        read_csv(path, [ColumnSchema("a", ColumnKind.continuous())])


def test_schema_inference_examples():
    sch = infer_schema(["a", "b", "c"], [["1.5", "0", "F"], ["2.25", "1", "M"],
                                         ["2.25", "1", "M"], ["1.5", "0", "F"]])
    a, b, c = sch
    assert a.kind.kind == CONTINUOUS and (a.lower, a.upper) == (1.5, 2.25)
    assert b.kind == ColumnKind.discrete(0) and (b.lower, b.upper) == (0.0, 1.0)
    assert c.kind.kind == CATEGORICAL and c.kind.codebook == ("F", "M")


def test_max_decimals_widens_discrete_grid():
    (col,) = infer_schema(["a"], [["1.5"], ["2.25"]], max_decimals=2)
    assert col.kind == ColumnKind.discrete(2)


def test_categorical_labels_written_not_codes(tmp_path):
    schema = (ColumnSchema("x", ColumnKind.continuous()),
              ColumnSchema("g", ColumnKind.categorical(["lo", "hi"])))
    t = Table(schema, np.array([[0.5, 1.0], [1.5, 0.0]]))
    write_csv(t, tmp_path / "t.csv")
    text = (tmp_path / "t.csv").read_text()
    assert "hi" in text and "lo" in text and ",1" not in text.splitlines()[1]


def test_empty_table_writes_header_only(tmp_path):
    schema = (ColumnSchema("x", ColumnKind.continuous()),)
    write_csv(Table(schema, np.zeros((0, 1))), tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().strip() == "x"
    back = read_csv(tmp_path / "e.csv", list(schema))
    assert back.n_rows == 0


def test_schema_sidecar_roundtrip(tmp_path):
    schema = [ColumnSchema("x", ColumnKind.continuous(), -1.0, 2.0),
              ColumnSchema("d", ColumnKind.discrete(2)),
              ColumnSchema("g", ColumnKind.categorical(["A", "B"]))]
    write_schema(schema, tmp_path / "s.txt")
    assert read_schema(tmp_path / "s.txt") == schema


def test_table_rejects_invalid_values():
    schema = (ColumnSchema("g", ColumnKind.categorical(["a", "b"])),)
    with pytest.raises(TableError):
        Table(schema, np.array([[2.0]]))
    with pytest.raises(TableError):
        Table((ColumnSchema("x", ColumnKind.continuous()),), np.array([[np.nan]]))
    with pytest.raises(TableError):
        ColumnKind.categorical(["a", "a"])


def test_bounds_default_to_observed_range():
    t = Table((ColumnSchema("x", ColumnKind.continuous()),), np.array([[3.0], [-1.0]]))
    b = with_bounds_from_data(t).schema[0]
    assert (b.lower, b.upper) == (-1.0, 3.0)


_finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=500, deadline=None)
@given(st.lists(st.tuples(_finite, st.integers(-50, 50), st.sampled_from(["u", "v", "w"])),
                min_size=0, max_size=6))
def test_csv_roundtrip_property(tmp_path_factory, rows):
    schema = (ColumnSchema("x", ColumnKind.continuous()), ColumnSchema("k", ColumnKind.discrete(0)),
              ColumnSchema("g", ColumnKind.categorical(["u", "v", "w"])))
    codes = {"u": 0, "v": 1, "w": 2}
    values = np.array([[x, k, codes[g]] for x, k, g in rows], dtype=float).reshape(-1, 3)
    t = Table(schema, values)
    path = tmp_path_factory.getbasetemp() / "rt.csv"
    write_csv(t, path)
    back = read_csv(path, list(schema))
    assert np.array_equal(back.values, t.values)
