"""Conditional Wasserstein GAN with gradient penalty for tabular rows."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Node
from .dataio import Dataset, class_counts, concat
from .encode import Codec, EncodedMatrix, decode, smooth_onehot
from .nn import DiscriminatorNet, GeneratorNet, check_wiring

logger = logging.getLogger(__name__)

ORIGIN_TAG = "comfortgan"


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    n_critic: int = 1
    latent_dim: int = 20
    learning_rate: float = 2e-4
    iterations: int = 20_000
    gp_lambda: float = 10.0
    seed: int = 0
    beta1: float = 0.0
    beta2: float = 0.9

    def __post_init__(self):
        for name in ("batch_size", "n_critic", "latent_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.gp_lambda < 0:
            raise ValueError("gp_lambda must be non-negative")


# batch size, critic steps per generator step, latent width, generator iterations
PRESETS = {
    "controlled": TrainConfig(batch_size=128, n_critic=1, latent_dim=20, iterations=20_000),
    "field": TrainConfig(batch_size=128, n_critic=3, latent_dim=80, iterations=20_000),
    "ashrae": TrainConfig(batch_size=64, n_critic=1, latent_dim=100, iterations=200_000),
}


@dataclass
class GanModel:
    generator: GeneratorNet
    critic: DiscriminatorNet
    g_params: dict[str, np.ndarray]
    d_params: dict[str, np.ndarray]
    g_state: dict[str, dict[str, np.ndarray]]
    codec: Codec
    config: TrainConfig
    g_loss: list[float] = field(default_factory=list)
    d_loss: list[float] = field(default_factory=list)
    g_opt: AdamState = field(default_factory=AdamState)
    d_opt: AdamState = field(default_factory=AdamState)

    @classmethod
    def initialize(cls, codec: Codec, config: TrainConfig) -> "GanModel":
        generator = GeneratorNet.for_codec(codec, config.latent_dim)
        critic = DiscriminatorNet(codec.width, codec.n_classes)
        check_wiring(generator, critic)
        seeds = np.random.SeedSequence([config.seed, 1]).generate_state(2)
        return cls(
            generator,
            critic,
            generator.init(int(seeds[0])),
            critic.init(int(seeds[1])),
            generator.init_state(),
            codec,
            config,
        )

    @property
    def label_vocab(self) -> tuple[int, ...]:
        return self.codec.label_vocab

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "codec": self.codec.to_dict(),
            "generator": {k: v.tolist() for k, v in self.g_params.items()},
            "generator_state": {k: {s: a.tolist() for s, a in v.items()} for k, v in self.g_state.items()},
            "critic": {k: v.tolist() for k, v in self.d_params.items()},
            "loss": {"g_loss": list(self.g_loss), "d_loss": list(self.d_loss)},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GanModel":
        codec = Codec.from_dict(doc["codec"])
        config = TrainConfig(**doc["config"])
        model = cls.initialize(codec, config)
        model.g_params = {k: np.array(v, dtype=float) for k, v in doc["generator"].items()}
        model.d_params = {k: np.array(v, dtype=float) for k, v in doc["critic"].items()}
        model.g_state = {
            k: {s: np.array(a, dtype=float) for s, a in v.items()} for k, v in doc["generator_state"].items()
        }
        model.g_loss = [float(x) for x in doc["loss"]["g_loss"]]
        model.d_loss = [float(x) for x in doc["loss"]["d_loss"]]
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GanModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def gradient_penalty(
    critic: Callable[[Node, Node], Node],
    real: np.ndarray,
    fake: np.ndarray,
    labels: np.ndarray,
    gp_lambda: float,
    rng: np.random.Generator,
) -> Node:
    """lambda * mean((||grad_x critic(x_hat, y)|| - 1)^2) at random interpolates.

    ``critic`` maps (features, labels) nodes to an (n, 1) score node built from
    parameter leaves; the result stays differentiable in those parameters.
    """
    real, fake = np.asarray(real, dtype=float), np.asarray(fake, dtype=float)
    if real.shape != fake.shape:
        raise ValueError(f"real batch {real.shape} and fake batch {fake.shape} differ in shape")
    eps = rng.uniform(size=(len(real), 1))
    x_hat = ad.parameter(eps * real + (1.0 - eps) * fake, name="x_hat")
    scores = critic(x_hat, ad.constant(labels))
    g = ad.grad_as_node(ad.sum(scores), x_hat)
    norms = ad.sqrt(ad.add(ad.sum(ad.square(g), axis=1), 1e-12))
    return ad.mul(ad.mean(ad.square(ad.sub(norms, 1.0))), gp_lambda)


def interpolate_grad_norms(model: GanModel, real: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Critic input-gradient norms at interpolates, measured as the penalty sees them."""
    fake = _generate(model, labels, rng, train=False)
    eps = rng.uniform(size=(len(real), 1))
    x_hat = ad.parameter(eps * real + (1 - eps) * fake)
    scores = model.critic.forward(model.d_params, x_hat, labels, train=True, rng=rng)
    (g,) = ad.grad(ad.sum(scores), [x_hat])
    return np.linalg.norm(g.value, axis=1)


def _generate(model: GanModel, labels: np.ndarray, rng: np.random.Generator, train: bool, update_stats=False) -> np.ndarray:
    z = rng.standard_normal((len(labels), model.config.latent_dim))
    with ad.no_grad():
        out = model.generator.forward(
            model.g_params, z, labels, train=train, state=model.g_state if (update_stats or not train) else None
        )
    return out.value


def _check_finite(loss: float, what: str, iteration: int | None) -> None:
    if not np.isfinite(loss):
        where = "" if iteration is None else f" at iteration {iteration}"
        raise TrainingError(f"non-finite {what} loss{where}")


def critic_step(
    model: GanModel,
    real_batch: np.ndarray,
    labels: np.ndarray,
    rng: np.random.Generator,
    iteration: int | None = None,
) -> float:
    """One Adam update of the critic; the generator is left untouched.

    Fake rows come from the generator in eval mode, i.e. exactly as ``sample``
    draws them.  In train mode batchnorm would normalise over the real batch's
    imbalanced label mix, which shifts each class away from what is sampled.
    """
    fake = _generate(model, labels, rng, train=False)
    leaves = ad.leaves_from(model.d_params)

    def critic(x, y):
        return model.critic.forward(leaves, x, y, train=True, rng=rng)

    try:
        loss = ad.sub(ad.mean(critic(ad.constant(fake), labels)), ad.mean(critic(ad.constant(real_batch), labels)))
        if model.config.gp_lambda > 0:
            loss = ad.add(loss, gradient_penalty(critic, real_batch, fake, labels, model.config.gp_lambda, rng))
    except FloatingPointError as exc:
        raise TrainingError(f"critic step failed at iteration {iteration}: {exc}") from exc
    _check_finite(loss.item(), "critic", iteration)
    names = list(leaves)
    grads = ad.grad(loss, [leaves[k] for k in names])
    model.d_params, model.d_opt = ad.adam_step(
        model.d_params,
        {k: g.value for k, g in zip(names, grads)},
        model.d_opt,
        model.config.learning_rate,
        model.config.beta1,
        model.config.beta2,
    )
    return loss.item()


def generator_step(
    model: GanModel,
    labels: np.ndarray,
    rng: np.random.Generator,
    iteration: int | None = None,
) -> float:
    """One Adam update of the generator against the current critic."""
    z = rng.standard_normal((len(labels), model.config.latent_dim))
    leaves = ad.leaves_from(model.g_params)
    try:
        fake = model.generator.forward(leaves, z, labels, train=True, state=model.g_state)
        scores = model.critic.forward(model.d_params, fake, labels, train=True, rng=rng)
        loss = ad.neg(ad.mean(scores))
    except FloatingPointError as exc:
        raise TrainingError(f"generator step failed at iteration {iteration}: {exc}") from exc
    _check_finite(loss.item(), "generator", iteration)
    names = list(leaves)
    grads = ad.grad(loss, [leaves[k] for k in names])
    model.g_params, model.g_opt = ad.adam_step(
        model.g_params,
        {k: g.value for k, g in zip(names, grads)},
        model.g_opt,
        model.config.learning_rate,
        model.config.beta1,
        model.config.beta2,
    )
    return loss.item()


def uniform_labels(codec: Codec, n: int, rng: np.random.Generator, smooth: bool = True) -> np.ndarray:
    idx = rng.integers(codec.n_classes, size=n)
    hot = np.eye(codec.n_classes)[idx]
    return smooth_onehot(hot, codec.gamma, rng) if smooth else hot


def train(
    data: EncodedMatrix,
    config: TrainConfig,
    log_every: int = 1000,
    model: GanModel | None = None,
) -> GanModel:
    """Run ``config.iterations`` generator steps, each after ``n_critic`` critic steps.

    Real batches are drawn uniformly with replacement.  Both losses are
    recorded once per generator iteration (critic loss averaged over its steps).
    """
    model = model or GanModel.initialize(data.codec, config)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
    n = len(data)
    if n == 0:
        raise TrainingError("empty training matrix")
    start = len(model.g_loss)
    for it in range(start, start + config.iterations):
        d_losses = []
        for _ in range(config.n_critic):
            idx = rng.integers(n, size=config.batch_size)
            d_losses.append(critic_step(model, data.values[idx], data.labels[idx], rng, it))
        labels = uniform_labels(data.codec, config.batch_size, rng)
        model.g_loss.append(generator_step(model, labels, rng, it))
        model.d_loss.append(float(np.mean(d_losses)))
        if log_every and (it + 1) % log_every == 0:
            logger.info("iteration %d: g_loss=%.4f d_loss=%.4f", it + 1, model.g_loss[-1], model.d_loss[-1])
    return model


def generate_matrix(model: GanModel, class_id: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Encoded feature rows for one class, generator in eval mode."""
    k = model.codec.class_index(class_id)
    if n == 0:
        return np.empty((0, model.codec.width))
    labels = np.zeros((n, model.codec.n_classes))
    labels[:, k] = 1.0
    return _generate(model, labels, rng, train=False)


def sample(model: GanModel, class_id: int, n: int, seed: int | None = None) -> Dataset:
    """``n`` decoded synthetic rows, all labelled ``class_id``."""
    k = model.codec.class_index(class_id)
    rng = np.random.default_rng(seed)
    values = generate_matrix(model, class_id, n, rng)
    labels = np.zeros((n, model.codec.n_classes))
    labels[:, k] = 1.0
    ids = np.full(n, class_id, dtype=np.int64)
    ds = decode(model.codec, EncodedMatrix(values, labels, ids, model.codec))
    if n and not np.all(ds.labels == class_id):
        raise AssertionError("decoded label differs from the conditioning class")
    return ds.with_origin(ORIGIN_TAG)


def balance_with(train_ds: Dataset, generate: Callable[[int, int], Dataset]) -> Dataset:
    """Append ``generate(class_id, n)`` rows until every class matches the predominant one.

    Real rows come first, unchanged and tagged ``real``.
    """
    real = train_ds.real_only().with_origin("real")
    parts = [real]
    for class_id, need in class_counts(real).deficits().items():
        if need > 0:
            extra = generate(class_id, need)
            if len(extra) != need:
                raise AssertionError(f"generator returned {len(extra)} rows for class {class_id}, wanted {need}")
            parts.append(extra)
    return concat(parts) if len(parts) > 1 else real


def balance(train_ds: Dataset, model: GanModel, seed: int | None = None) -> Dataset:
    seeds = np.random.SeedSequence(seed)
    return balance_with(
        train_ds, lambda c, n: sample(model, c, n, seed=int(seeds.spawn(1)[0].generate_state(1)[0]))
    )


def write_loss_csv(model: GanModel, path: str | Path, every: int = 100) -> None:
    """Loss history as ``iteration,g_loss,d_loss``, keeping every ``every``-th row and the last."""
    n = len(model.g_loss)
    keep = [i for i in range(n) if i % every == 0 or i == n - 1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "g_loss", "d_loss"])
        for i in keep:
            writer.writerow([i, repr(model.g_loss[i]), repr(model.d_loss[i])])


def with_overrides(config: TrainConfig, **overrides) -> TrainConfig:
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
