"""Small synthetic datasets for smoke tests and the bundled demo."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .dataio import Column, Dataset, Schema, from_frame


def gaussian_mixture(
    n: int = 600,
    weights=(10, 3, 1),
    n_features: int = 4,
    spread: float = 1.0,
    separation: float = 2.0,
    seed: int = 0,
) -> Dataset:
    """Imbalanced classes, each an isotropic Gaussian around its own centre.

    Class sizes follow ``weights`` exactly (up to rounding), labelled 0, 1, ...
    """
    rng = np.random.default_rng(seed)
    weights = np.asarray(weights, dtype=float)
    sizes = np.floor(n * weights / weights.sum()).astype(int)
    sizes[0] += n - sizes.sum()
    centres = rng.normal(scale=separation, size=(len(weights), n_features))
    blocks, labels = [], []
    for k, size in enumerate(sizes):
        blocks.append(centres[k] + spread * rng.standard_normal((size, n_features)))
        labels.append(np.full(size, k))
    X = np.vstack(blocks)
    y = np.concatenate(labels)
    order = rng.permutation(n)
    names = [f"x{i}" for i in range(n_features)]
    schema = Schema(tuple(Column(c, "continuous") for c in names) + (Column("label", "label"),))
    frame = pd.DataFrame(X[order], columns=names)
    frame["label"] = y[order]
    return from_frame(schema, frame)


THERMAL_SCHEMA = Schema(
    (
        Column("air_temperature", "continuous", unit="degC"),
        Column("relative_humidity", "continuous", unit="%"),
        Column("clothing", "continuous", unit="clo"),
        Column("gender", "categorical"),
        Column("hour", "cyclical", period=24),
        Column("thermal_sensation", "label"),
    )
)


def thermal_survey(n: int = 800, seed: int = 0) -> Dataset:
    """Seven-point sensation votes driven by temperature, clothing and hour.

    The vote distribution peaks at 0 and thins out towards -3/+3, mimicking
    the imbalance of real comfort surveys.
    """
    rng = np.random.default_rng(seed)
    temp = rng.normal(24.0, 3.0, n)
    rh = rng.uniform(25.0, 75.0, n)
    clo = rng.uniform(0.3, 1.2, n)
    gender = rng.choice(["female", "male"], n)
    hour = rng.integers(7, 20, n).astype(float)
    drive = 0.45 * (temp - 24.0) + 1.2 * (clo - 0.75) + 0.01 * (rh - 50.0) + 0.15 * np.sin(np.pi * hour / 12)
    drive += np.where(gender == "female", -0.2, 0.2)
    vote = np.clip(np.round(drive + rng.normal(0, 0.6, n)), -3, 3).astype(int)
    frame = pd.DataFrame(
        {
            "air_temperature": np.round(temp, 2),
            "relative_humidity": np.round(rh, 1),
            "clothing": np.round(clo, 2),
            "gender": gender,
            "hour": hour,
            "thermal_sensation": vote,
        }
    )
    return from_frame(THERMAL_SCHEMA, frame)
