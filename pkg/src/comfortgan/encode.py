"""Feature transforms between schema rows and the numeric matrix models use.

Continuous columns are min-max scaled to [-1, 1], categorical columns become
one-hot groups (optionally smoothed with Uniform(0, gamma) noise and
renormalized), cyclical columns become (sin, cos) pairs.  Labels get the same
one-hot treatment as categoricals but live in their own matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .dataio import Dataset, Schema, SchemaError

DEFAULT_GAMMA = 0.2


class EncodeError(ValueError):
    pass


@dataclass(frozen=True)
class Slot:
    name: str
    kind: str
    start: int
    stop: int

    @property
    def width(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class Codec:
    schema: Schema
    ranges: Mapping[str, tuple[float, float]]
    vocab: Mapping[str, tuple[str, ...]]
    label_vocab: tuple[int, ...]
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise EncodeError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name, (lo, hi) in self.ranges.items():
            if not lo < hi:
                raise EncodeError(f"continuous column {name!r} is constant on the fit data")

    @property
    def layout(self) -> list[Slot]:
        slots, pos = [], 0
        for col in self.schema.features:
            width = {"continuous": 1, "cyclical": 2}.get(col.kind) or len(self.vocab[col.name])
            slots.append(Slot(col.name, col.kind, pos, pos + width))
            pos += width
        return slots

    @property
    def width(self) -> int:
        layout = self.layout
        return layout[-1].stop if layout else 0

    @property
    def n_classes(self) -> int:
        return len(self.label_vocab)

    def class_index(self, class_id: int) -> int:
        try:
            return self.label_vocab.index(int(class_id))
        except ValueError:
            raise KeyError(f"class {class_id} is not in the label vocabulary {self.label_vocab}") from None

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "ranges": {k: [float(lo), float(hi)] for k, (lo, hi) in self.ranges.items()},
            "vocab": {k: list(v) for k, v in self.vocab.items()},
            "label_vocab": [int(c) for c in self.label_vocab],
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Codec":
        return cls(
            Schema.from_dict(doc["schema"]),
            {k: (float(v[0]), float(v[1])) for k, v in doc["ranges"].items()},
            {k: tuple(v) for k, v in doc["vocab"].items()},
            tuple(int(c) for c in doc["label_vocab"]),
            float(doc["gamma"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Codec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class EncodedMatrix:
    values: np.ndarray  # (n, codec.width)
    labels: np.ndarray  # (n, n_classes), one-hot or smoothed
    label_ids: np.ndarray  # (n,) class ids
    codec: Codec

    def __len__(self) -> int:
        return len(self.values)


def fit(ds: Dataset, gamma: float = DEFAULT_GAMMA) -> Codec:
    if len(ds) == 0:
        raise EncodeError("cannot fit a codec on an empty dataset")
    if not ds.has_integer_labels:
        raise EncodeError("labels must be integer class ids; round them first")
    ranges, vocab = {}, {}
    for col in ds.schema.features:
        if col.kind == "continuous":
            values = ds.frame[col.name].to_numpy(dtype=float)
            ranges[col.name] = (float(values.min()), float(values.max()))
        elif col.kind == "categorical":
            vocab[col.name] = tuple(str(v) for v in ds.vocabulary(col.name))
    labels = tuple(sorted(int(c) for c in set(ds.labels.tolist())))
    return Codec(ds.schema, ranges, vocab, labels, gamma)


def smooth_onehot(onehot: np.ndarray, gamma: float, rng: np.random.Generator) -> np.ndarray:
    """Add Uniform(0, gamma) noise to every slot and renormalize each row."""
    noisy = onehot + rng.uniform(0.0, gamma, size=onehot.shape)
    return noisy / noisy.sum(axis=1, keepdims=True)


def _onehot(index: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(index), width))
    out[np.arange(len(index)), index] = 1.0
    return out


def _lookup(values, vocab: tuple, name: str) -> np.ndarray:
    table = {v: i for i, v in enumerate(vocab)}
    try:
        return np.array([table[v] for v in values], dtype=int)
    except KeyError as exc:
        raise EncodeError(f"column {name!r}: value {exc.args[0]!r} is outside the fitted vocabulary") from None


def encode(codec: Codec, ds: Dataset, seed: int | None = None, smooth: bool = True) -> EncodedMatrix:
    """Encode ``ds`` with fitted statistics.

    With ``smooth`` the categorical and label groups receive seeded noise;
    otherwise they stay exact one-hot (the space used for distances).
    """
    if ds.schema != codec.schema:
        raise SchemaError("dataset schema differs from the codec schema")
    rng = np.random.default_rng(seed)
    n = len(ds)
    out = np.empty((n, codec.width))
    for slot in codec.layout:
        raw = ds.frame[slot.name]
        if slot.kind == "continuous":
            lo, hi = codec.ranges[slot.name]
            out[:, slot.start] = 2.0 * (raw.to_numpy(dtype=float) - lo) / (hi - lo) - 1.0
        elif slot.kind == "cyclical":
            period = ds.schema.columns[ds.schema.names.index(slot.name)].period
            angle = 2.0 * np.pi * raw.to_numpy(dtype=float) / period
            out[:, slot.start] = np.sin(angle)
            out[:, slot.start + 1] = np.cos(angle)
        else:
            hot = _onehot(_lookup(raw.astype(str).tolist(), codec.vocab[slot.name], slot.name), slot.width)
            out[:, slot.start : slot.stop] = smooth_onehot(hot, codec.gamma, rng) if smooth else hot
    label_ids = ds.labels.astype(np.int64)
    hot = _onehot(_lookup(label_ids.tolist(), codec.label_vocab, ds.schema.label), codec.n_classes)
    labels = smooth_onehot(hot, codec.gamma, rng) if smooth else hot
    return EncodedMatrix(out, labels, label_ids, codec)


def decode(codec: Codec, m: EncodedMatrix) -> Dataset:
    values = np.asarray(m.values, dtype=float)
    if values.ndim != 2 or values.shape[1] != codec.width:
        raise EncodeError(f"matrix width {values.shape[-1]} does not match codec width {codec.width}")
    if m.labels.shape != (len(values), codec.n_classes):
        raise EncodeError("label matrix does not match codec label vocabulary")
    schema = codec.schema
    data: dict[str, object] = {}
    for slot in codec.layout:
        block = values[:, slot.start : slot.stop]
        if slot.kind == "continuous":
            lo, hi = codec.ranges[slot.name]
            data[slot.name] = (np.clip(block[:, 0], -1.0, 1.0) + 1.0) / 2.0 * (hi - lo) + lo
        elif slot.kind == "cyclical":
            period = schema.columns[schema.names.index(slot.name)].period
            angle = np.arctan2(block[:, 0], block[:, 1])
            hours = np.mod(angle * period / (2.0 * np.pi), period)
            data[slot.name] = np.where(hours >= period, 0.0, hours)
        else:
            vocab = codec.vocab[slot.name]
            data[slot.name] = [vocab[i] for i in np.argmax(block, axis=1)]
    vocab = np.asarray(codec.label_vocab, dtype=np.int64)
    data[schema.label] = vocab[np.argmax(m.labels, axis=1)]
    frame = pd.DataFrame(data, columns=schema.names)
    return Dataset(schema, frame)
