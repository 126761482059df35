"""Generator and critic multilayer perceptrons for the conditional WGAN-GP."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .encode import Codec

GENERATOR_HIDDEN = (128, 256, 128, 64, 32)
CRITIC_HIDDEN = (64, 128, 64, 32, 16)
LEAKY_SLOPE = 0.2
DROPOUT_RATE = 0.5


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _nodes(params: Mapping) -> dict[str, Node]:
    return {k: v if isinstance(v, Node) else Node(v) for k, v in params.items()}


def output_activations(codec: Codec) -> tuple[tuple[int, int, str], ...]:
    """(start, stop, 'tanh' | 'softmax') segments covering the feature width.

    Adjacent continuous/cyclical slots are merged into one tanh segment; every
    categorical group gets its own softmax.
    """
    segments: list[list] = []
    for slot in codec.layout:
        if slot.kind == "categorical":
            segments.append([slot.start, slot.stop, "softmax"])
        elif segments and segments[-1][2] == "tanh":
            segments[-1][1] = slot.stop
        else:
            segments.append([slot.start, slot.stop, "tanh"])
    return tuple(tuple(s) for s in segments)


@dataclass(frozen=True)
class GeneratorNet:
    latent_dim: int
    label_width: int
    feature_width: int
    activations: tuple[tuple[int, int, str], ...]
    hidden: tuple[int, ...] = GENERATOR_HIDDEN

    def __post_init__(self):
        covered = [i for start, stop, _ in self.activations for i in range(start, stop)]
        if covered != list(range(self.feature_width)):
            raise ValueError("output activations must tile the feature width")

    @classmethod
    def for_codec(cls, codec: Codec, latent_dim: int) -> "GeneratorNet":
        return cls(latent_dim, codec.n_classes, codec.width, output_activations(codec))

    @property
    def widths(self) -> list[int]:
        return [self.latent_dim + self.label_width, *self.hidden, self.feature_width]

    def init(self, seed: int) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        params = {}
        w = self.widths
        for i in range(len(w) - 1):
            params[f"W{i}"] = glorot(rng, w[i], w[i + 1])
            params[f"b{i}"] = np.zeros(w[i + 1])
            if i < len(self.hidden):
                params[f"gamma{i}"] = np.ones(w[i + 1])
                params[f"beta{i}"] = np.zeros(w[i + 1])
        return params

    def init_state(self) -> dict[str, dict[str, np.ndarray]]:
        """Batchnorm running statistics, one entry per hidden layer."""
        return {f"bn{i}": {"mean": np.zeros(h), "var": np.ones(h)} for i, h in enumerate(self.hidden)}

    def n_params(self) -> int:
        w = self.widths
        linear = sum(w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1))
        return linear + 2 * sum(self.hidden)

    def forward(self, params: Mapping, z, y, train: bool, state: Mapping | None = None) -> Node:
        """Encoded feature batch for latent ``z`` conditioned on labels ``y``.

        In train mode batch statistics are used; if ``state`` is given its
        running statistics are updated in place.  Eval mode requires ``state``.
        """
        p = _nodes(params)
        z, y = ad.constant(z), ad.constant(y)
        if z.shape[1] != self.latent_dim:
            raise ValueError(f"latent width {z.shape[1]} != {self.latent_dim}")
        if y.shape[1] != self.label_width:
            raise ValueError(f"label width {y.shape[1]} != {self.label_width}")
        h = ad.concat([z, y])
        for i in range(len(self.hidden)):
            h = ad.add(ad.matmul(h, p[f"W{i}"]), p[f"b{i}"])
            running = None if state is None else state[f"bn{i}"]
            h = ad.batchnorm(h, p[f"gamma{i}"], p[f"beta{i}"], train=train, running=running)
            h = ad.relu(h)
        last = len(self.hidden)
        out = ad.add(ad.matmul(h, p[f"W{last}"]), p[f"b{last}"])
        parts = []
        for start, stop, kind in self.activations:
            block = ad.columns(out, start, stop)
            parts.append(ad.tanh(block) if kind == "tanh" else ad.softmax(block))
        return parts[0] if len(parts) == 1 else ad.concat(parts)


@dataclass(frozen=True)
class DiscriminatorNet:
    feature_width: int
    label_width: int
    hidden: tuple[int, ...] = CRITIC_HIDDEN
    slope: float = LEAKY_SLOPE
    dropout: float = DROPOUT_RATE

    @property
    def widths(self) -> list[int]:
        return [self.feature_width + self.label_width, *self.hidden, 1]

    def init(self, seed: int) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        w = self.widths
        params = {}
        for i in range(len(w) - 1):
            params[f"W{i}"] = glorot(rng, w[i], w[i + 1])
            params[f"b{i}"] = np.zeros(w[i + 1])
        return params

    def n_params(self) -> int:
        w = self.widths
        return sum(w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1))

    def forward(self, params: Mapping, x, y, train: bool, rng: np.random.Generator | None = None) -> Node:
        """One unconstrained score per row; dropout only in train mode."""
        p = _nodes(params)
        x, y = ad.constant(x), ad.constant(y)
        if x.shape[1] != self.feature_width or y.shape[1] != self.label_width:
            raise ValueError(
                f"critic expects widths ({self.feature_width}, {self.label_width}), "
                f"got ({x.shape[1]}, {y.shape[1]})"
            )
        h = ad.concat([x, y])
        for i in range(len(self.hidden)):
            h = ad.add(ad.matmul(h, p[f"W{i}"]), p[f"b{i}"])
            h = ad.leaky_relu(h, self.slope)
            h = ad.dropout(h, self.dropout, rng, train)
        last = len(self.hidden)
        return ad.add(ad.matmul(h, p[f"W{last}"]), p[f"b{last}"])


def check_wiring(generator: GeneratorNet, critic: DiscriminatorNet) -> None:
    if generator.feature_width + generator.label_width != critic.widths[0]:
        raise ValueError("generator output + label width must equal critic input width")
