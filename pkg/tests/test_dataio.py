import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from comfortgan import dataio
from comfortgan.dataio import Column, Schema, SchemaError

SCHEMA = Schema(
    (Column("t", "continuous"), Column("g", "categorical"), Column("h", "cyclical", period=24), Column("y", "label"))
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_schema_invariants():
    with pytest.raises(SchemaError):
        Schema((Column("a", "continuous"),))
    with pytest.raises(SchemaError):
        Schema((Column("a", "label"), Column("a", "continuous")))
    with pytest.raises(SchemaError):
        Column("h", "cyclical", period=0)
    with pytest.raises(SchemaError):
        Column("h", "cyclical")
    with pytest.raises(SchemaError):
        Column("x", "ordinal")


def test_schema_json_round_trip(tmp_path):
    SCHEMA.save(tmp_path / "s.json")
    assert Schema.load(tmp_path / "s.json") == SCHEMA
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["columns"][2] == {"name": "h", "kind": "cyclical", "period": 24}


def test_load_valid_rows(tmp_path):
    p = _write(tmp_path, "t,g,h,y\n20.5,M,6,0\n22,F,13.5,1\n19,M,23,-1\n")
    ds = dataio.load_csv(p, SCHEMA)
    assert len(ds) == 3 and ds.dropped == 0
    assert ds.labels.tolist() == [0, 1, -1]
    assert ds.frame["g"].tolist() == ["M", "F", "M"]


def test_load_drops_incomplete_rows(tmp_path):
    p = _write(tmp_path, "t,g,h,y\n20.5,M,6,0\n,F,13.5,1\n19,M,23,-1\n")
    ds = dataio.load_csv(p, SCHEMA)
    assert len(ds) == 2 and ds.dropped == 1


@pytest.mark.parametrize(
    "text, match",
    [
        ("t,g,y\n1,M,0\n", "missing column"),
        ("t,g,h,y\n1,M,abc,0\n", r"row 2, column 'h'"),
        ("", "empty"),
        ("t,g,h,y\n", "no data rows"),
        ("t,g,h,y,zz\n1,M,2,0,5\n", "unexpected column"),
    ],
)
def test_load_errors(tmp_path, text, match):
    with pytest.raises(dataio.LoadError, match=match):
        dataio.load_csv(_write(tmp_path, text), SCHEMA)


def test_save_load_round_trip(tmp_path, mixed_dataset):
    ds = mixed_dataset.with_origin("real")
    dataio.save_csv(ds, tmp_path / "a.csv")
    back = dataio.load_csv(tmp_path / "a.csv", ds.schema)
    pd.testing.assert_frame_equal(back.frame, ds.frame)
    assert back.origin.tolist() == ds.origin.tolist()


@pytest.mark.parametrize("value, expected", [(0.4, 0), (-1.5, -2), (2.0, 2), (1.5, 2), (-0.4, 0), (2.6, 3)])
def test_round_label(value, expected):
    frame = pd.DataFrame({"t": [1.0], "g": ["a"], "h": [1.0], "y": [value]})
    ds = dataio.from_frame(SCHEMA, frame)
    assert dataio.round_label(ds).labels.tolist() == [expected]


def test_round_label_halves_go_away_from_zero_on_a_grid():
    halves = np.arange(-10, 10) + 0.5
    frame = pd.DataFrame({"t": 1.0, "g": "a", "h": 1.0, "y": halves})
    got = dataio.round_label(dataio.from_frame(SCHEMA, frame)).labels
    expected = [int(np.ceil(v)) if v > 0 else int(np.floor(v)) for v in halves]
    assert got.tolist() == expected


def test_round_label_rejects_non_finite():
    frame = pd.DataFrame({"t": [1.0], "g": ["a"], "h": [1.0], "y": [1.0]})
    ds = dataio.from_frame(SCHEMA, frame)
    ds.frame["y"] = [np.inf]
    with pytest.raises(ValueError):
        dataio.round_label(ds)


def _labelled(labels):
    n = len(labels)
    frame = pd.DataFrame({"t": np.arange(n, dtype=float), "g": "a", "h": 0.0, "y": labels})
    return dataio.from_frame(SCHEMA, frame)


def test_remap_seven_to_three():
    ds = _labelled([-3, -2, -1, 0, 1, 2, 3, 0])
    mapping = {-3: -1, -2: -1, -1: -1, 0: 0, 1: 1, 2: 1, 3: 1}
    out = dataio.remap_classes(ds, mapping)
    assert dataio.class_counts(out).counts == {-1: 3, 0: 2, 1: 3}
    assert dataio.reduce_to_three(ds).labels.tolist() == out.labels.tolist()


def test_remap_identity_and_merge_counts():
    ds = _labelled([0, 1, 2, 3, 4, 0, 1, 2, 4, 4])
    assert dataio.remap_classes(ds, {c: c for c in range(5)}).labels.tolist() == ds.labels.tolist()
    merged = dataio.class_counts(dataio.remap_classes(ds, {0: 0, 1: 0, 2: 1, 3: 2, 4: 2}))
    # by hand: {0,1} -> 2+2, {2} -> 2, {3,4} -> 1+3
    assert merged.counts == {0: 4, 1: 2, 2: 4}
    with pytest.raises(KeyError):
        dataio.remap_classes(ds, {0: 0})


def test_split_sizes_and_determinism():
    ds = _labelled(list(range(10)))
    tr, te = dataio.train_test_split(ds, 0.7, seed=1)
    assert len(tr) == 7 and len(te) == 3
    assert set(tr.frame["t"]) & set(te.frame["t"]) == set()
    tr2, _ = dataio.train_test_split(ds, 0.7, seed=1)
    assert tr.frame.equals(tr2.frame)
    with pytest.raises(ValueError):
        dataio.train_test_split(ds, 1.0)


def test_split_seeds_differ():
    ds = _labelled([0] * 1000)
    a, _ = dataio.train_test_split(ds, 0.7, seed=1)
    b, _ = dataio.train_test_split(ds, 0.7, seed=2)
    assert set(a.frame["t"]) != set(b.frame["t"])


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 200), f=st.floats(0.05, 0.95), seed=st.integers(0, 10_000))
def test_split_is_a_partition(n, f, seed):
    ds = _labelled([i % 3 for i in range(n)])
    tr, te = dataio.train_test_split(ds, f, seed)
    ids = sorted(tr.frame["t"].tolist() + te.frame["t"].tolist())
    assert ids == list(range(n)) and len(tr) == int(np.floor(n * f))


def test_class_counts_and_tie_rule():
    h = dataio.class_counts(_labelled([1, 1, 1, 1, 1, 2, 2]))
    assert h.predominant == 1 and h.total == 7
    tie = dataio.class_counts(_labelled([3, 2, 3, 2, -1, -1]))
    assert tie.predominant == -1
    assert tie.deficits() == {-1: 0, 2: 0, 3: 0}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=80))
def test_counts_sum_to_rows_and_remap_preserves_rows(labels):
    ds = _labelled(labels)
    assert dataio.class_counts(ds).total == len(labels)
    assert len(dataio.reduce_to_three(ds)) == len(labels)
