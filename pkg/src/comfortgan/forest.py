"""Bootstrap random forest of Gini-split decision trees."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 10
    max_features: int | None = None  # None -> ceil(sqrt(d))
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be positive")

    def features_per_split(self, d: int) -> int:
        if self.max_features is None:
            return max(1, math.ceil(math.sqrt(d)))
        return min(self.max_features, d)


@dataclass
class Tree:
    """Flat arrays; node 0 is the root and ``feature == -1`` marks a leaf.

    Rows with ``x[feature] <= threshold`` go left.  ``counts`` holds the
    bootstrap class counts that reached each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    depth: int

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        for _ in range(self.depth):
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return node

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum, i.e. the smallest class id
        return np.argmax(self.counts[self.leaf_index(X)], axis=1)


def _best_split(X: np.ndarray, y: np.ndarray, n_classes: int, features: np.ndarray):
    """(impurity, feature, threshold) of the best Gini split over ``features``.

    Features are scanned in ascending index order and only a strictly lower
    impurity replaces the incumbent, so ties keep the lowest feature index and,
    within a feature, the lowest threshold.
    """
    n = len(y)
    features = np.sort(features)
    if n < 2:
        return (np.inf, -1, 0.0)
    cols = X[:, features]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    onehot = np.eye(n_classes)[y]
    left = np.cumsum(onehot[order], axis=0)[:-1]  # (n-1, m, C)
    right = onehot.sum(axis=0) - left
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    # weighted Gini = (n - |left|^2/n_left - |right|^2/n_right) / n
    impurity = (n - (left**2).sum(axis=2) / n_left - (right**2).sum(axis=2) / n_right) / n
    impurity[xs[:-1] >= xs[1:]] = np.inf
    # first cut within rounding of the minimum, so equal impurities keep the lowest threshold
    lowest = impurity.min(axis=0)
    pos = np.argmax(impurity <= lowest + 1e-12, axis=0)
    mins = impurity[pos, np.arange(len(features))]
    best = (np.inf, -1, 0.0)
    for j, f in enumerate(features):
        if mins[j] < best[0] - 1e-12:
            lo, hi = xs[pos[j], j], xs[pos[j] + 1, j]
            threshold = lo + (hi - lo) / 2.0
            if threshold >= hi:
                threshold = lo
            best = (float(mins[j]), int(f), float(threshold))
    return best


def fit_tree(
    X: np.ndarray, y: np.ndarray, n_classes: int, max_depth: int, n_features: int, rng: np.random.Generator
) -> Tree:
    d = X.shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or np.count_nonzero(counts[node]) < 2:
            continue
        order = rng.permutation(d)
        split = _best_split(X[idx], y[idx], n_classes, order[:n_features])
        if split[1] < 0 and n_features < d:
            # no usable feature in the draw; keep scanning the rest, one at a time
            for f in order[n_features:]:
                split = _best_split(X[idx], y[idx], n_classes, np.array([f]))
                if split[1] >= 0:
                    break
        _, f, t = split
        if f < 0:
            continue
        go_left = X[idx, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, t
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(
        np.array(feature, dtype=int),
        np.array(threshold, dtype=float),
        np.array(left, dtype=int),
        np.array(right, dtype=int),
        np.array(counts, dtype=int),
        max_depth,
    )


class RandomForest:
    """Majority vote over bootstrap trees; vote ties go to the smallest class id."""

    def __init__(self, config: ForestConfig = ForestConfig()):
        self.config = config
        self.trees: list[Tree] = []
        self.classes_: np.ndarray | None = None
        self.n_features_: int | None = None

    def fit(self, X, y) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes to fit a forest")
        n, d = X.shape
        self.n_features_ = d
        m = self.config.features_per_split(d)
        self.trees = []
        for t in range(self.config.n_trees):
            # one independent stream per tree index
            rng = np.random.default_rng([self.config.seed, t])
            boot = rng.integers(n, size=n)
            self.trees.append(fit_tree(X[boot], y_idx[boot], len(self.classes_), self.config.max_depth, m, rng))
        return self

    def votes(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.classes_ is None:
            raise RuntimeError("forest is not fitted")
        if len(X) == 0:
            return np.zeros((0, len(self.classes_)), dtype=int)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ValueError(f"expected {self.n_features_} features, got {X.shape[-1]}")
        tally = np.zeros((len(X), len(self.classes_)), dtype=int)
        rows = np.arange(len(X))
        for tree in self.trees:
            np.add.at(tally, (rows, tree.predict_index(X)), 1)
        return tally

    def predict(self, X) -> np.ndarray:
        tally = self.votes(X)
        return self.classes_[np.argmax(tally, axis=1)] if len(tally) else self.classes_[:0]


def fit(X, y, config: ForestConfig = ForestConfig()) -> RandomForest:
    return RandomForest(config).fit(X, y)


def f1_micro(predicted, actual) -> float:
    """Micro-averaged F1 from pooled per-class true/false positives and negatives."""
    predicted, actual = np.asarray(predicted), np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {actual.shape}")
    if len(actual) == 0:
        raise ValueError("cannot score an empty prediction")
    classes = np.union1d(predicted, actual)
    tp = fp = fn = 0
    for c in classes:
        p, a = predicted == c, actual == c
        tp += np.count_nonzero(p & a)
        fp += np.count_nonzero(p & ~a)
        fn += np.count_nonzero(~p & a)
    return 2.0 * tp / (2.0 * tp + fp + fn)
