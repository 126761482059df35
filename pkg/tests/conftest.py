import numpy as np
import pandas as pd
import pytest

from comfortgan.dataio import Column, Schema, from_frame


def rel_err(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def central_difference(f, arrays, h=1e-4):
    """Finite-difference gradient of scalar ``f()`` w.r.t. each array (perturbed in place)."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = f()
            arr[idx] = old - h
            down = f()
            arr[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


@pytest.fixture
def mixed_schema():
    return Schema(
        (
            Column("temp", "continuous", unit="degC"),
            Column("sex", "categorical"),
            Column("hour", "cyclical", period=24),
            Column("rh", "continuous"),
            Column("vote", "label"),
        )
    )


@pytest.fixture
def mixed_dataset(mixed_schema):
    rng = np.random.default_rng(3)
    n = 60
    frame = pd.DataFrame(
        {
            "temp": rng.uniform(18, 30, n),
            "sex": rng.choice(["F", "M"], n),
            "hour": rng.uniform(0, 24, n),
            "rh": rng.uniform(20, 80, n),
            "vote": rng.choice([-1, 0, 1], n, p=[0.2, 0.6, 0.2]),
        }
    )
    return from_frame(mixed_schema, frame)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"{criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
