"""Variability, diversity and classifier-efficacy metrics for augmenters.

Distances are Euclidean in the deterministic encoding (exact one-hot groups,
scaled continuous values), so every augmenter and the baseline share one
space.  Each repetition regenerates the synthetic rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .dataio import Dataset
from .encode import Codec, encode
from .forest import ForestConfig, RandomForest, f1_micro

# (train dataset, seed) -> balanced dataset with an origin column
Augmenter = Callable[[Dataset, int], Dataset]

MODE_COLLAPSE_FRACTION = 0.01
BASELINE = "baseline"


def _by_class(values: np.ndarray, labels: np.ndarray) -> dict[int, np.ndarray]:
    return {int(c): values[labels == c] for c in np.unique(labels)}


def variability(source: Mapping[int, np.ndarray], draws_per_class: int = 30, rng=None) -> float:
    """Mean distance between two rows drawn independently (with replacement) per class."""
    rng = np.random.default_rng(rng)
    dists = []
    for c in sorted(source):
        rows = np.asarray(source[c], dtype=float)
        if len(rows) < 2:
            raise ValueError(f"class {c} has fewer than 2 samples")
        a = rng.integers(len(rows), size=draws_per_class)
        b = rng.integers(len(rows), size=draws_per_class)
        dists.append(np.linalg.norm(rows[a] - rows[b], axis=1))
    return float(np.mean(np.concatenate(dists)))


def diversity(
    generated: Mapping[int, np.ndarray],
    train: np.ndarray,
    draws_per_class: int = 30,
    rng=None,
    self_index: Mapping[int, np.ndarray] | None = None,
) -> float:
    """Mean distance from a random generated row to its nearest training row.

    The search covers the whole training matrix.  ``self_index[c][i]`` names
    the training row that generated row ``i`` of class ``c`` *is*, which is
    then left out (the baseline case where train is compared with itself).
    """
    rng = np.random.default_rng(rng)
    train = np.asarray(train, dtype=float)
    if len(train) == 0:
        raise ValueError("empty training set")
    dists = []
    for c in sorted(generated):
        rows = np.asarray(generated[c], dtype=float)
        if len(rows) == 0:
            raise ValueError(f"no generated rows for class {c}")
        pick = rng.integers(len(rows), size=draws_per_class)
        d = np.linalg.norm(rows[pick][:, None, :] - train[None, :, :], axis=2)
        if self_index is not None:
            d[np.arange(len(pick)), np.asarray(self_index[c])[pick]] = np.inf
        dists.append(d.min(axis=1))
    return float(np.mean(np.concatenate(dists)))


def identity_augmenter(train_ds: Dataset, seed: int) -> Dataset:
    return train_ds.real_only().with_origin("real")


@dataclass
class EvalReport:
    augmenter: str
    dataset: str
    scheme: str
    repetitions: int
    variability: float | None
    diversity: float | None
    efficacy: float
    efficacy_std: float
    variability_std: float | None = None
    diversity_std: float | None = None
    per_repetition: dict[str, list] = field(default_factory=dict)
    baseline: dict[str, float | None] = field(default_factory=dict)
    mode_collapse: bool = False
    metadata: dict = field(default_factory=dict)

    def efficacy_delta(self) -> float | None:
        base = self.baseline.get("efficacy")
        return None if base is None else self.efficacy - base

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EvalReport":
        return cls(**doc)


def _mean_std(values: Sequence[float | None]) -> tuple[float | None, float | None]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    return float(np.mean(vals)), float(np.std(vals))


def _repetition(
    name: str,
    augmenter: Augmenter | None,
    train_ds: Dataset,
    test_X: np.ndarray,
    test_y: np.ndarray,
    codec: Codec,
    forest_config: ForestConfig,
    draws: int,
    seed: int,
) -> dict[str, float | None]:
    aug_seed, draw_seed, forest_seed = np.random.SeedSequence(seed).generate_state(3)
    train_enc = encode(codec, train_ds.real_only(), smooth=False)
    rng = np.random.default_rng(draw_seed)
    config = ForestConfig(forest_config.n_trees, forest_config.max_depth, forest_config.max_features, int(forest_seed))
    if augmenter is None:
        by_class = _by_class(train_enc.values, train_enc.label_ids)
        index = {c: np.flatnonzero(train_enc.label_ids == c) for c in by_class}
        var = variability(by_class, draws, rng)
        div = diversity(by_class, train_enc.values, draws, rng, self_index=index)
        X, y = train_enc.values, train_enc.label_ids
    else:
        balanced = augmenter(train_ds, int(aug_seed))
        enc = encode(codec, balanced, smooth=False)
        fake = balanced.origin != "real"
        var = div = None
        if fake.any():
            generated = _by_class(enc.values[fake], enc.label_ids[fake])
            var = variability(generated, draws, rng)
            div = diversity(generated, train_enc.values, draws, rng)
        X, y = enc.values, enc.label_ids
    model = RandomForest(config).fit(X, y)
    return {"variability": var, "diversity": div, "efficacy": f1_micro(model.predict(test_X), test_y)}


def evaluate_augmenter(
    name: str,
    augmenter: Augmenter | None,
    train_ds: Dataset,
    test_ds: Dataset,
    codec: Codec,
    repetitions: int = 30,
    draws_per_class: int = 30,
    forest_config: ForestConfig = ForestConfig(),
    seed: int = 0,
    jobs: int = 1,
    dataset: str = "",
    scheme: str = "original",
) -> EvalReport:
    """Score one augmenter; ``augmenter=None`` scores the raw training set."""
    test_enc = encode(codec, test_ds, smooth=False)
    args = (name, augmenter, train_ds, test_enc.values, test_enc.label_ids, codec, forest_config, draws_per_class)
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(repetitions)]
    if jobs > 1:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=jobs)(delayed(_repetition)(*args, s) for s in seeds)
    else:
        rows = [_repetition(*args, s) for s in seeds]
    per_rep = {k: [r[k] for r in rows] for k in ("variability", "diversity", "efficacy")}
    var, var_std = _mean_std(per_rep["variability"])
    div, div_std = _mean_std(per_rep["diversity"])
    eff, eff_std = _mean_std(per_rep["efficacy"])
    return EvalReport(
        augmenter=name,
        dataset=dataset,
        scheme=scheme,
        repetitions=repetitions,
        variability=var,
        diversity=div,
        efficacy=eff,
        efficacy_std=eff_std,
        variability_std=var_std,
        diversity_std=div_std,
        per_repetition=per_rep,
        metadata={
            "distance_space": "deterministic one-hot + scaled continuous",
            "diversity_search": "full training set, all classes",
            "draws_per_class": draws_per_class,
            "classes": [int(c) for c in codec.label_vocab],
            "forest": {"n_trees": forest_config.n_trees, "max_depth": forest_config.max_depth},
        },
    )


def compare(
    train_ds: Dataset,
    test_ds: Dataset,
    codec: Codec,
    augmenters: Mapping[str, Augmenter],
    repetitions: int = 30,
    draws_per_class: int = 30,
    forest_config: ForestConfig = ForestConfig(),
    seed: int = 0,
    jobs: int = 1,
    dataset: str = "",
    scheme: str = "original",
) -> list[EvalReport]:
    """Baseline row followed by one row per augmenter, all on shared seeds."""
    common = dict(
        repetitions=repetitions,
        draws_per_class=draws_per_class,
        forest_config=forest_config,
        seed=seed,
        jobs=jobs,
        dataset=dataset,
        scheme=scheme,
    )
    base = evaluate_augmenter(BASELINE, None, train_ds, test_ds, codec, **common)
    reports = [base]
    for name, augmenter in augmenters.items():
        reports.append(evaluate_augmenter(name, augmenter, train_ds, test_ds, codec, **common))
    reference = {"variability": base.variability, "diversity": base.diversity, "efficacy": base.efficacy}
    for r in reports:
        r.baseline = dict(reference)
        if r is not base and r.variability is not None and base.variability:
            r.mode_collapse = r.variability < MODE_COLLAPSE_FRACTION * base.variability
    return reports


def _fmt(value: float | None, digits: int = 2) -> str:
    return "-" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.{digits}f}"


def render_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text table: variability | diversity | efficacy (percentage-point delta)."""
    header = ["Model", "Variability", "Diversity", "Machine learning efficacy"]
    lines = []
    for r in reports:
        eff = _fmt(r.efficacy)
        delta = r.efficacy_delta()
        if r.augmenter != BASELINE and delta is not None:
            eff += f"({100 * delta:+.0f}%)"
        name = r.augmenter + (" [mode collapse]" if r.mode_collapse else "")
        lines.append([name, _fmt(r.variability), _fmt(r.diversity), eff])
    widths = [max(len(row[i]) for row in [header, *lines]) for i in range(4)]

    def fmt(row):
        return "  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))

    rule = "-" * len(fmt(header))
    title = []
    if reports:
        title.append(f"dataset: {reports[0].dataset or '-'}  scheme: {reports[0].scheme}  repetitions: {reports[0].repetitions}")
    return "\n".join([*title, rule, fmt(header), rule, *map(fmt, lines), rule]) + "\n"


def save_reports(reports: Sequence[EvalReport], path: str | Path) -> None:
    Path(path).write_text(json.dumps([r.to_dict() for r in reports], indent=2) + "\n", encoding="utf-8")


def load_reports(path: str | Path) -> list[EvalReport]:
    return [EvalReport.from_dict(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]
