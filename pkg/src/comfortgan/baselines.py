"""SMOTE and ADASYN oversampling in the encoded feature space."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataio import Dataset, class_counts
from .encode import Codec, EncodedMatrix, decode, encode
from .gan import balance_with


@dataclass(frozen=True)
class OversamplerConfig:
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be at least 1")


@dataclass
class Synthetic:
    """Generated rows plus how each was made.

    Row ``i`` equals ``X[base[i]] + gap[i] * (X[neighbor[i]] - X[base[i]])``
    where ``X`` is the input matrix.
    """

    values: np.ndarray
    labels: np.ndarray
    base: np.ndarray
    neighbor: np.ndarray
    gap: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def nearest_neighbors(query: np.ndarray, pool: np.ndarray, k: int, exclude_self: bool = False, chunk: int = 512) -> np.ndarray:
    """Indices into ``pool`` of the ``k`` closest rows to each query (exact, brute force).

    With ``exclude_self`` query ``i`` is pool row ``i`` and is skipped.
    Ties resolve toward the lower pool index.
    """
    k = min(k, len(pool) - int(exclude_self))
    out = np.empty((len(query), k), dtype=int)
    pool_sq = np.einsum("ij,ij->i", pool, pool)
    for lo in range(0, len(query), chunk):
        q = query[lo : lo + chunk]
        d = np.einsum("ij,ij->i", q, q)[:, None] - 2.0 * q @ pool.T + pool_sq[None, :]
        if exclude_self:
            d[np.arange(len(q)), np.arange(lo, lo + len(q))] = np.inf
        out[lo : lo + chunk] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def _effective_k(k: int, size: int, class_id) -> int:
    if k >= size:
        warnings.warn(f"class {class_id}: k_neighbors={k} reduced to {size - 1} (class has {size} rows)", stacklevel=3)
        return size - 1
    return k


def _check_targets(labels: np.ndarray, targets: Mapping[int, int]) -> None:
    for c, need in targets.items():
        if need > 0 and np.count_nonzero(labels == c) < 2:
            raise ValueError(f"class {c} needs at least 2 rows to oversample")


def _interpolate(X, members, neighbors, base_local, rng) -> tuple[np.ndarray, ...]:
    pick = rng.integers(neighbors.shape[1], size=len(base_local))
    nn_local = neighbors[base_local, pick]
    gap = rng.uniform(size=len(base_local))
    base, nb = members[base_local], members[nn_local]
    values = X[base] + gap[:, None] * (X[nb] - X[base])
    return values, base, nb, gap


def _merge(parts: list, width: int) -> Synthetic:
    if not parts:
        empty = np.empty(0, dtype=int)
        return Synthetic(np.empty((0, width)), empty, empty, empty, np.empty(0))
    return Synthetic(*(np.concatenate(col) for col in zip(*parts)))


def smote(
    X: np.ndarray, y: np.ndarray, targets: Mapping[int, int], config: OversamplerConfig = OversamplerConfig()
) -> Synthetic:
    """``targets[c]`` synthetic rows per class, each on a segment to a same-class neighbour."""
    X, y = np.asarray(X, dtype=float), np.asarray(y)
    _check_targets(y, targets)
    rng = np.random.default_rng(config.seed)
    parts = []
    for c in sorted(targets):
        need = int(targets[c])
        if need <= 0:
            continue
        members = np.flatnonzero(y == c)
        k = _effective_k(config.k_neighbors, len(members), c)
        neighbors = nearest_neighbors(X[members], X[members], k, exclude_self=True)
        base_local = rng.integers(len(members), size=need)
        values, base, nb, gap = _interpolate(X, members, neighbors, base_local, rng)
        parts.append((values, np.full(need, c), base, nb, gap))
    return _merge(parts, X.shape[1])


def density_ratios(X: np.ndarray, y: np.ndarray, class_id: int, k: int) -> np.ndarray:
    """Share of each class member's k nearest neighbours (any class) that belong elsewhere."""
    members = np.flatnonzero(y == class_id)
    k = min(k, len(X) - 1)
    neighbors = nearest_neighbors(X[members], X, k + 1)
    # drop the row itself when it shows up among its own neighbours
    rows = []
    for i, m in enumerate(members):
        nb = neighbors[i]
        nb = nb[nb != m][:k]
        rows.append(np.count_nonzero(y[nb] != class_id) / k)
    return np.array(rows)


def allocate(ratios: np.ndarray, need: int) -> np.ndarray:
    """Split ``need`` rows in proportion to ``ratios``.

    Each share is floored; the leftover goes one row at a time to the highest
    ratios (lower index first on ties).  All-zero ratios fall back to an even
    split with a warning.
    """
    ratios = np.asarray(ratios, dtype=float)
    if ratios.sum() <= 0:
        warnings.warn("no class mixing around this class; allocating synthetic rows uniformly", stacklevel=2)
        ratios = np.ones_like(ratios)
    exact = ratios / ratios.sum() * need
    # tolerance keeps 3/8*8 from flooring to 2
    counts = np.floor(exact + 1e-9).astype(int)
    leftover = need - counts.sum()
    order = np.lexsort((np.arange(len(ratios)), -ratios))
    counts[order[:leftover]] += 1
    return counts


def adasyn(
    X: np.ndarray, y: np.ndarray, targets: Mapping[int, int], config: OversamplerConfig = OversamplerConfig()
) -> Synthetic:
    """Like SMOTE, but rows with more other-class neighbours seed more synthetic rows."""
    X, y = np.asarray(X, dtype=float), np.asarray(y)
    _check_targets(y, targets)
    rng = np.random.default_rng(config.seed)
    parts = []
    for c in sorted(targets):
        need = int(targets[c])
        if need <= 0:
            continue
        members = np.flatnonzero(y == c)
        counts = allocate(density_ratios(X, y, c, config.k_neighbors), need)
        k = _effective_k(config.k_neighbors, len(members), c)
        neighbors = nearest_neighbors(X[members], X[members], k, exclude_self=True)
        base_local = np.repeat(np.arange(len(members)), counts)
        values, base, nb, gap = _interpolate(X, members, neighbors, base_local, rng)
        parts.append((values, np.full(need, c), base, nb, gap))
    return _merge(parts, X.shape[1])


METHODS = {"smote": smote, "adasyn": adasyn}


def oversample(
    train_ds: Dataset, codec: Codec, method: str, config: OversamplerConfig = OversamplerConfig()
) -> Dataset:
    """Balance ``train_ds`` with SMOTE or ADASYN rows decoded through ``codec``."""
    try:
        algorithm = METHODS[method]
    except KeyError:
        raise ValueError(f"unknown oversampler {method!r}; choose from {sorted(METHODS)}") from None
    real = train_ds.real_only()
    m = encode(codec, real, seed=config.seed)
    targets = class_counts(real).deficits()
    synth = algorithm(m.values, m.label_ids, targets, config)
    by_class = {}
    for c in targets:
        rows = synth.values[synth.labels == c]
        ids = np.full(len(rows), c, dtype=np.int64)
        labels = np.eye(codec.n_classes)[[codec.class_index(c)] * len(rows)].reshape(len(rows), codec.n_classes)
        by_class[c] = decode(codec, EncodedMatrix(rows, labels, ids, codec)).with_origin(method)
    return balance_with(real, lambda c, n: by_class[c])
