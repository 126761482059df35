"""Schema-checked loading, splitting and relabelling of tabular datasets."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

KINDS = ("continuous", "categorical", "cyclical", "label")
MISSING = {"", "na", "nan", "null", "none"}
ORIGIN = "origin"


class SchemaError(ValueError):
    pass


class LoadError(ValueError):
    pass


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    period: int | None = None
    unit: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "cyclical":
            if self.period is None or int(self.period) != self.period or self.period <= 0:
                raise SchemaError(f"cyclical column {self.name!r} needs a positive integer period")
        elif self.period is not None:
            raise SchemaError(f"column {self.name!r}: period only applies to cyclical columns")

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.period is not None:
            out["period"] = self.period
        if self.unit is not None:
            out["unit"] = self.unit
        return out


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        if ORIGIN in names:
            raise SchemaError(f"{ORIGIN!r} is a reserved column name")
        n_labels = [c.kind for c in self.columns].count("label")
        if n_labels != 1:
            raise SchemaError(f"schema needs exactly one label column, found {n_labels}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def label(self) -> str:
        return next(c.name for c in self.columns if c.kind == "label")

    @property
    def features(self) -> list[Column]:
        return [c for c in self.columns if c.kind != "label"]

    def of_kind(self, kind: str) -> list[Column]:
        return [c for c in self.columns if c.kind == kind]

    def to_dict(self) -> dict:
        return {"columns": [c.to_dict() for c in self.columns]}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Schema":
        try:
            cols = [Column(**c) for c in doc["columns"]]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc
        return cls(tuple(cols))

    @classmethod
    def load(cls, path: str | Path) -> "Schema":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Dataset:
    """Rows conforming to a schema.

    ``frame`` holds floats for continuous/cyclical columns, strings for
    categorical columns and the class label (int once integral).  ``origin``
    optionally tags every row as ``real`` or with the augmenter that made it.
    """

    schema: Schema
    frame: pd.DataFrame
    origin: np.ndarray | None = None
    dropped: int = 0

    def __post_init__(self):
        if list(self.frame.columns) != self.schema.names:
            raise SchemaError("frame columns do not match the schema")
        if self.origin is not None and len(self.origin) != len(self.frame):
            raise SchemaError("origin length does not match row count")

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def labels(self) -> np.ndarray:
        return self.frame[self.schema.label].to_numpy()

    @property
    def has_integer_labels(self) -> bool:
        return pd.api.types.is_integer_dtype(self.frame[self.schema.label].dtype)

    def vocabulary(self, name: str) -> list:
        """Distinct values of a column in order of first occurrence."""
        return list(pd.unique(self.frame[name]))

    def take(self, index: Sequence[int]) -> "Dataset":
        index = np.asarray(index, dtype=int)
        origin = None if self.origin is None else self.origin[index]
        return Dataset(self.schema, self.frame.iloc[index].reset_index(drop=True), origin)

    def real_only(self) -> "Dataset":
        if self.origin is None:
            return self
        return self.take(np.flatnonzero(self.origin == "real"))

    def with_origin(self, tag: str) -> "Dataset":
        return replace(self, origin=np.full(len(self), tag, dtype=object))


@dataclass(frozen=True)
class ClassHistogram:
    counts: dict[int, int]
    predominant: int = field(init=False)

    def __post_init__(self):
        if not self.counts:
            raise ValueError("empty histogram")
        best = min(self.counts, key=lambda c: (-self.counts[c], c))
        object.__setattr__(self, "predominant", best)

    @property
    def total(self) -> int:
        return int(np.sum(list(self.counts.values())))

    def deficits(self) -> dict[int, int]:
        """Rows each class needs to reach the predominant count."""
        top = self.counts[self.predominant]
        return {c: top - n for c, n in self.counts.items()}

    def is_uniform(self) -> bool:
        return len(set(self.counts.values())) == 1


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise LoadError(f"row {row}, column {col!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise LoadError(f"row {row}, column {col!r}: non-finite value {text!r}")
    return value


def load_csv(path: str | Path, schema: Schema) -> Dataset:
    """Read a comma-separated file with a header row.

    Rows with any missing cell are dropped; the count is kept on
    ``Dataset.dropped``.  An extra ``origin`` column, as written by
    :func:`save_csv`, is accepted and restored.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise LoadError(f"{path}: file is empty") from None
    header = list(raw.columns)
    missing = [n for n in schema.names if n not in header]
    if missing:
        raise LoadError(f"{path}: missing column(s) {missing}")
    extra = [n for n in header if n not in schema.names and n != ORIGIN]
    if extra:
        raise LoadError(f"{path}: unexpected column(s) {extra}")
    if raw.empty:
        raise LoadError(f"{path}: no data rows")

    is_missing = raw[schema.names].apply(lambda s: s.str.strip().str.lower().isin(MISSING))
    keep = ~is_missing.any(axis=1).to_numpy()
    dropped = int((~keep).sum())
    data: dict[str, list] = {}
    for col in schema.columns:
        cells = raw[col.name].to_numpy()
        if col.kind == "categorical":
            data[col.name] = [str(v) for v, k in zip(cells, keep) if k]
        else:
            data[col.name] = [
                _parse_float(v, i + 2, col.name) for i, (v, k) in enumerate(zip(cells, keep)) if k
            ]
    if not keep.any():
        raise LoadError(f"{path}: every row has a missing value")
    frame = pd.DataFrame(data, columns=schema.names)
    frame = _integral_labels(frame, schema.label)
    origin = raw[ORIGIN].to_numpy(dtype=object)[keep] if ORIGIN in header else None
    if dropped:
        logger.info("%s: dropped %d incomplete row(s)", path, dropped)
    return Dataset(schema, frame, origin, dropped)


def _integral_labels(frame: pd.DataFrame, label: str) -> pd.DataFrame:
    values = frame[label].to_numpy(dtype=float)
    if np.all(values == np.round(values)):
        frame[label] = values.astype(np.int64)
    return frame


def save_csv(ds: Dataset, path: str | Path) -> None:
    frame = ds.frame.copy()
    if ds.origin is not None:
        frame[ORIGIN] = ds.origin
    frame.to_csv(path, index=False, lineterminator="\n")


def from_frame(schema: Schema, frame: pd.DataFrame, origin=None) -> Dataset:
    """Build a dataset from an in-memory frame, coercing column types."""
    frame = frame[schema.names].copy()
    for col in schema.columns:
        if col.kind == "categorical":
            frame[col.name] = frame[col.name].astype(str)
        elif col.kind != "label":
            frame[col.name] = frame[col.name].astype(float)
    if frame.isna().any().any():
        raise LoadError("frame contains missing values")
    frame = _integral_labels(frame.reset_index(drop=True), schema.label)
    return Dataset(schema, frame, None if origin is None else np.asarray(origin, dtype=object))


def round_label(ds: Dataset) -> Dataset:
    """Round labels to the nearest integer, halves away from zero."""
    values = ds.frame[ds.schema.label].to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("label column holds non-finite values")
    rounded = np.sign(values) * np.floor(np.abs(values) + 0.5)
    frame = ds.frame.copy()
    frame[ds.schema.label] = rounded.astype(np.int64)
    return replace(ds, frame=frame)


def remap_classes(ds: Dataset, mapping: Mapping[int, int]) -> Dataset:
    labels = ds.labels
    unmapped = sorted(set(labels.tolist()) - set(mapping))
    if unmapped:
        raise KeyError(f"class id(s) {unmapped} have no mapping")
    frame = ds.frame.copy()
    frame[ds.schema.label] = np.array([mapping[v] for v in labels.tolist()], dtype=np.int64)
    return replace(ds, frame=frame)


def reduce_to_three(ds: Dataset) -> Dataset:
    """Merge the cold and hot extremes: negative -> -1, zero -> 0, positive -> 1."""
    observed = sorted(set(ds.labels.tolist()))
    return remap_classes(ds, {c: int(np.sign(c)) for c in observed})


def train_test_split(ds: Dataset, train_fraction: float = 0.7, seed: int = 0) -> tuple[Dataset, Dataset]:
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(ds)
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(math.floor(n * train_fraction))
    return ds.take(np.sort(perm[:cut])), ds.take(np.sort(perm[cut:]))


def class_counts(ds: Dataset) -> ClassHistogram:
    values, counts = np.unique(ds.labels, return_counts=True)
    return ClassHistogram({int(v): int(c) for v, c in zip(values, counts)})


def concat(parts: Sequence[Dataset]) -> Dataset:
    """Stack datasets sharing a schema; rows without origin count as real."""
    schema = parts[0].schema
    frames, origins = [], []
    for p in parts:
        if p.schema != schema:
            raise SchemaError("cannot concatenate datasets with different schemas")
        frames.append(p.frame)
        origins.append(p.origin if p.origin is not None else np.full(len(p), "real", dtype=object))
    frame = pd.concat(frames, ignore_index=True)
    frame = _integral_labels(frame, schema.label)
    return Dataset(schema, frame, np.concatenate(origins).astype(object))
