from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from faircorpus.frame import (
    Column,
    Table,
    column_median,
    infer_column,
    split_indices,
    train_test_split,
    value_frequencies,
)


def col(values, dtype="float", name="c"):
    return Column.from_values(name, values, dtype)


@pytest.mark.parametrize(
    "cells, dtype",
    [
        (["1", "0", "1"], "bool"),
        (["true", "false"], "bool"),
        (["1", "2", "3"], "int"),
        (["1", "2.5"], "float"),
        (["1e3", "-2"], "float"),
        (["a", "b", "a", "b"], "categorical"),
        (["a", "b", "c"], "text"),
        (["", "?"], "bool"),
    ],
)
def test_inference(cells, dtype):
    assert infer_column("c", cells).dtype == dtype


def test_na_tokens_become_missing():
    c = infer_column("c", ["1", "NA", "?", "", "4"])
    assert c.dtype == "int"
    assert c.missing.tolist() == [False, True, True, True, False]


def test_columns_are_read_only():
    c = col([1.0, 2.0])
    with pytest.raises(ValueError):
        c.values[0] = 5.0


def test_table_validation():
    with pytest.raises(ValueError):
        Table((col([1.0]), col([2.0])))
    with pytest.raises(ValueError):
        Table((col([1.0], name="a"), col([1.0, 2.0], name="b")))
    with pytest.raises(ValueError):
        Table((col([1.0], name="a"), col([2.0], name="b")), {"a": "target", "b": "target"})


def test_split_ten_rows():
    train, test = split_indices(10, 0.3, 80539)
    assert (len(train), len(test)) == (7, 3)
    assert set(train).isdisjoint(test)
    assert sorted([*train, *test]) == list(range(10))
    again = split_indices(10, 0.3, 80539)
    assert np.array_equal(train, again[0]) and np.array_equal(test, again[1])


def test_split_seeds_differ():
    # enumerated once from the seeded generator and frozen
    a = split_indices(4, 0.5, 1)
    b = split_indices(4, 0.5, 2)
    assert not np.array_equal(a[1], b[1])


@given(st.integers(2, 200), st.floats(0.05, 0.95), st.integers(0, 2**32 - 1))
def test_split_partition_property(n, frac, seed):
    n_test = round(frac * n)
    if n_test in (0, n):
        with pytest.raises(ValueError):
            split_indices(n, frac, seed)
        return
    train, test = split_indices(n, frac, seed)
    assert len(test) == n_test
    assert len(train) + len(test) == n
    assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(n))


def test_split_rejects_degenerate():
    with pytest.raises(ValueError):
        split_indices(1, 0.3, 0)
    with pytest.raises(ValueError):
        split_indices(10, 1.0, 0)


def test_train_test_split_tables():
    t = Table.from_dict({"x": list(range(10)), "y": [True, False] * 5}, {"x": "int", "y": "bool"}, {"y": "target"})
    train, test = train_test_split(t, 0.3, 80539)
    assert train.n_rows == 7 and test.n_rows == 3
    assert train.roles == t.roles
    assert sorted(train["x"].to_list() + test["x"].to_list()) == list(range(10))


@pytest.mark.parametrize("values, expected", [([1, 2, 4], 2), ([1, 3], 2), ([5], 5), ([1, None, 4, 2], 2)])
def test_median(values, expected):
    assert column_median(col(values, "int")) == expected


def test_median_all_missing():
    with pytest.raises(ValueError):
        column_median(col([None, None], "float"))


def test_frequencies():
    assert value_frequencies(col(["a", "a", "b"], "categorical")) == {"a": 2, "b": 1}
    assert value_frequencies(col([None, None], "categorical")) == {}
    tie = value_frequencies(col(["b", "a", "a", "b"], "categorical"))
    assert tie == {"a": 2, "b": 2}
    assert next(iter(tie)) == "a"


def test_csv_round_trip_formatting():
    t = Table.from_dict(
        {"f": [1.0, 2.5, None], "b": [True, False, True], "s": ["x", None, "y,z"]},
        {"f": "float", "b": "bool", "s": "categorical"},
    )
    assert t.to_csv() == 'f,b,s\n1,1,x\n2.5,0,\n,1,"y,z"\n'


def test_numeric_matrix_and_missing():
    t = Table.from_dict({"a": [1, None], "b": [True, False]}, {"a": "int", "b": "bool"})
    m = t.numeric_matrix(["a", "b"])
    assert np.isnan(m[1, 0]) and m[0, 1] == 1.0
    assert t.missing_matrix().tolist() == [[False, False], [True, False]]
