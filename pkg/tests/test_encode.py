import json

import numpy as np
import pandas as pd
import pytest

from comfortgan import encode as enc
from comfortgan.dataio import Column, Schema, from_frame
from comfortgan.encode import EncodedMatrix


def test_fit_statistics(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    t = mixed_dataset.frame["temp"]
    assert codec.ranges["temp"] == (t.min(), t.max())
    assert codec.vocab["sex"] == tuple(pd.unique(mixed_dataset.frame["sex"]))
    assert codec.gamma == 0.2
    assert codec.label_vocab == (-1, 0, 1)


def test_fit_rejects_constant_column(mixed_dataset):
    frame = mixed_dataset.frame.copy()
    frame["rh"] = 5.0
    with pytest.raises(enc.EncodeError, match="constant"):
        enc.fit(from_frame(mixed_dataset.schema, frame))


def test_layout_is_contiguous(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    layout = codec.layout
    assert layout[0].start == 0
    assert all(a.stop == b.start for a, b in zip(layout, layout[1:]))
    assert [s.width for s in layout] == [1, 2, 2, 1]
    assert codec.width == 6


def test_continuous_endpoints_and_quarter_hour():
    schema = Schema((Column("x", "continuous"), Column("h", "cyclical", period=24), Column("y", "label")))
    ds = from_frame(schema, pd.DataFrame({"x": [10.0, 30.0, 20.0], "h": [6.0, 0.0, 12.0], "y": [0, 1, 0]}))
    m = enc.encode(enc.fit(ds), ds, smooth=False)
    np.testing.assert_allclose(m.values[:, 0], [-1.0, 1.0, 0.0])
    np.testing.assert_allclose(m.values[0, 1:], [1.0, 0.0], atol=1e-12)


def test_smoothing_keeps_argmax_and_simplex(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    m = enc.encode(codec, mixed_dataset, seed=5)
    det = enc.encode(codec, mixed_dataset, smooth=False)
    for slot in codec.layout:
        if slot.kind == "categorical":
            block = m.values[:, slot.start : slot.stop]
            np.testing.assert_allclose(block.sum(axis=1), 1.0)
            assert (block >= 0).all()
            hot = det.values[:, slot.start : slot.stop]
            assert (block.argmax(1) == hot.argmax(1)).all()
            # hot slot >= 1/(1+2*gamma) for a two-way group
            assert (block.max(1) >= 1 / (1 + 2 * 0.2) - 1e-12).all()
    np.testing.assert_allclose(m.labels.sum(axis=1), 1.0)
    assert (m.labels.argmax(1) == det.labels.argmax(1)).all()


def test_encode_is_seeded(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    a = enc.encode(codec, mixed_dataset, seed=1)
    b = enc.encode(codec, mixed_dataset, seed=1)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, enc.encode(codec, mixed_dataset, seed=2).values)


def test_round_trip(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    back = enc.decode(codec, enc.encode(codec, mixed_dataset, seed=3))
    f0, f1 = mixed_dataset.frame, back.frame
    assert f1["sex"].tolist() == f0["sex"].tolist()
    assert f1["vote"].tolist() == f0["vote"].tolist()
    np.testing.assert_allclose(f1["temp"], f0["temp"], atol=1e-9)
    diff = np.abs(f1["hour"] - f0["hour"])
    assert (np.minimum(diff, 24 - diff) < 1e-6).all()


def test_out_of_vocabulary_and_width_errors(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    frame = mixed_dataset.frame.copy()
    frame.loc[0, "sex"] = "X"
    with pytest.raises(enc.EncodeError, match="sex"):
        enc.encode(codec, from_frame(mixed_dataset.schema, frame))
    m = enc.encode(codec, mixed_dataset)
    bad = EncodedMatrix(m.values[:, :-1], m.labels, m.label_ids, codec)
    with pytest.raises(enc.EncodeError, match="width"):
        enc.decode(codec, bad)


def test_decode_clips_continuous(mixed_dataset):
    codec = enc.fit(mixed_dataset)
    m = enc.encode(codec, mixed_dataset.take([0]), smooth=False)
    m.values[0, 0] = 1.7
    assert enc.decode(codec, m).frame["temp"].iloc[0] == codec.ranges["temp"][1]


def test_test_rows_use_train_statistics(mixed_dataset):
    codec = enc.fit(mixed_dataset.take(range(30)))
    lo, hi = codec.ranges["temp"]
    frame = mixed_dataset.frame.iloc[:2].copy()
    frame["temp"] = [hi + (hi - lo), lo]
    m = enc.encode(codec, from_frame(mixed_dataset.schema, frame), smooth=False)
    np.testing.assert_allclose(m.values[:, 0], [3.0, -1.0])


def test_codec_json_round_trip(tmp_path, mixed_dataset):
    codec = enc.fit(mixed_dataset)
    codec.save(tmp_path / "c.json")
    again = enc.Codec.load(tmp_path / "c.json")
    assert again == codec
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["ranges"]["temp"][0] == codec.ranges["temp"][0]


def test_gamma_bounds(mixed_dataset):
    with pytest.raises(enc.EncodeError):
        enc.fit(mixed_dataset, gamma=1.0)
