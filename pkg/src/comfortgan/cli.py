"""Command-line pipeline: split -> train -> augment -> evaluate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import zlib
from pathlib import Path

import numpy as np

from . import baselines, dataio, encode, evaluation, gan, plotting, toy
from .dataio import Dataset, Schema
from .forest import ForestConfig

log = logging.getLogger("comfortgan")

SCHEMES = ("original", "reduced3")
AUGMENTERS = ("none", "smote", "adasyn", "comfortgan")


class UsageError(ValueError):
    pass


def stage_seed(seed: int, stage: str) -> int:
    """Per-stage seed: the global seed mixed with a checksum of the stage name."""
    return int(np.random.SeedSequence([seed, zlib.crc32(stage.encode())]).generate_state(1)[0])


def _load(path, schema: Schema, scheme: str, round_labels: bool = False) -> Dataset:
    ds = dataio.load_csv(path, schema)
    if ds.dropped:
        print(f"{path}: dropped {ds.dropped} incomplete row(s)", file=sys.stderr)
    if round_labels or not ds.has_integer_labels:
        ds = dataio.round_label(ds)
    if scheme == "reduced3":
        ds = dataio.reduce_to_three(ds)
    return ds


def _histogram_text(hist: dataio.ClassHistogram) -> str:
    parts = ", ".join(f"{c}: {n}" for c, n in hist.counts.items())
    return f"{{{parts}}} (predominant {hist.predominant})"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sidecar(out: Path, argv) -> None:
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(out / "run.log", "a", encoding="utf-8") as fh:
        fh.write(f"{stamp} comfortgan {' '.join(argv)}\n")


def _require(*paths) -> None:
    for p in paths:
        if p is None or not Path(p).exists():
            raise UsageError(f"required file not found: {p}")


def _train_config(args) -> gan.TrainConfig:
    base = gan.PRESETS[args.preset]
    return gan.with_overrides(
        base,
        iterations=args.iterations,
        batch_size=args.batch_size,
        n_critic=args.n_critic,
        latent_dim=args.latent_dim,
        learning_rate=args.learning_rate,
        gp_lambda=args.gp_lambda,
        seed=stage_seed(args.seed, "train"),
    )


# --------------------------------------------------------------- commands


def cmd_split(args) -> int:
    _require(args.data, args.schema)
    schema = Schema.load(args.schema)
    ds = _load(args.data, schema, args.scheme, args.round_label)
    train, test = dataio.train_test_split(ds, args.train_fraction, stage_seed(args.seed, "split"))
    out = _out_dir(args)
    dataio.save_csv(train, out / "train.csv")
    dataio.save_csv(test, out / "test.csv")
    full, tr = dataio.class_counts(ds), dataio.class_counts(train)
    summary = {
        "rows": len(ds),
        "dropped": ds.dropped,
        "train": len(train),
        "test": len(test),
        "original_counts": {str(k): v for k, v in full.counts.items()},
        "train_counts": {str(k): v for k, v in tr.counts.items()},
        "predominant": tr.predominant,
        "balancing_target": tr.counts[tr.predominant],
    }
    (out / "histogram.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    plotting.class_histogram(full, tr, out / "class_histogram.png", title=args.scheme)
    print(f"train {len(train)} rows {_histogram_text(tr)}; test {len(test)} rows")
    return 0


def cmd_train(args) -> int:
    _require(args.train, args.schema)
    schema = Schema.load(args.schema)
    train = _load(args.train, schema, args.scheme)
    config = _train_config(args)
    codec = encode.fit(train, args.gamma)
    matrix = encode.encode(codec, train, seed=stage_seed(args.seed, "encode"))
    model = gan.train(matrix, config)
    out = _out_dir(args)
    codec.save(out / "codec.json")
    model.save(out / "model.json")
    gan.write_loss_csv(model, out / "loss.csv")
    plotting.loss_curves(model.g_loss, model.d_loss, out / "loss.png")
    print(f"trained {config.iterations} iterations (batch {config.batch_size}, critic {config.n_critic}, latent {config.latent_dim})")
    return 0


def _augmenter(name: str, args, schema: Schema, train: Dataset):
    """Return (augmenter callable, codec) for one augmenter name."""
    if name == "none":
        return evaluation.identity_augmenter, encode.fit(train, args.gamma)
    if name in baselines.METHODS:
        codec = encode.fit(train, args.gamma)
        k = args.k_neighbors

        def run(ds, seed, _name=name):
            return baselines.oversample(ds, codec, _name, baselines.OversamplerConfig(k, seed))

        return run, codec
    if name == "comfortgan":
        _require(args.model)
        model = gan.GanModel.load(args.model)
        if model.codec.schema != schema:
            raise UsageError("model was trained on a different schema")
        return (lambda ds, seed: gan.balance(ds, model, seed)), model.codec
    raise UsageError(f"unknown augmenter {name!r}; choose from {', '.join(AUGMENTERS)}")


def cmd_augment(args) -> int:
    _require(args.train, args.schema)
    schema = Schema.load(args.schema)
    train = _load(args.train, schema, args.scheme)
    run, _ = _augmenter(args.augmenter, args, schema, train)
    balanced = run(train, stage_seed(args.seed, f"augment/{args.augmenter}"))
    out = _out_dir(args)
    dataio.save_csv(balanced, out / "balanced.csv")
    print(f"balanced {len(balanced)} rows {_histogram_text(dataio.class_counts(balanced))}")
    return 0


def cmd_evaluate(args) -> int:
    _require(args.train, args.test, args.schema)
    schema = Schema.load(args.schema)
    train = _load(args.train, schema, args.scheme)
    test = _load(args.test, schema, args.scheme)
    names = [n.strip() for n in args.augmenters.split(",") if n.strip()] if args.augmenters else []
    augmenters, codec = {}, encode.fit(train, args.gamma)
    for name in names:
        run, aug_codec = _augmenter(name, args, schema, train)
        augmenters[name] = run
        if name == "comfortgan":
            codec = aug_codec
    reports = evaluation.compare(
        train,
        test,
        codec,
        augmenters,
        repetitions=args.repetitions,
        draws_per_class=args.draws,
        forest_config=ForestConfig(args.n_trees, args.max_depth),
        seed=stage_seed(args.seed, "evaluate"),
        jobs=args.jobs,
        dataset=args.dataset_name or Path(args.train).parent.name,
        scheme=args.scheme,
    )
    out = _out_dir(args)
    evaluation.save_reports(reports, out / "report.json")
    table = evaluation.render_table(reports)
    (out / "table.txt").write_text(table, encoding="utf-8")
    plotting.metric_bars(reports, out / "metrics.png")
    print(table, end="")
    return 0


def cmd_toy(args) -> int:
    out = _out_dir(args)
    ds = toy.thermal_survey(args.rows, seed=args.seed)
    dataio.save_csv(ds, out / "toy.csv")
    ds.schema.save(out / "toy_schema.json")
    print(f"wrote {len(ds)} rows to {out / 'toy.csv'}")
    return 0


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys provide defaults for these options")
    common.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--scheme", choices=SCHEMES, default="original")
    common.add_argument("--gamma", type=float, default=encode.DEFAULT_GAMMA, help="one-hot noise bound")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="comfortgan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", parents=[common], help="random train/test split")
    p.add_argument("--data", required=False)
    p.add_argument("--schema", required=False)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--round-label", action="store_true", help="round real-valued labels first")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", parents=[common], help="train the conditional WGAN-GP")
    p.add_argument("--train")
    p.add_argument("--schema")
    p.add_argument("--preset", choices=sorted(gan.PRESETS), default="controlled")
    p.add_argument("--iterations", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--n-critic", type=int)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--gp-lambda", type=float)
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (
        ("augment", cmd_augment, "write a class-balanced training set"),
        ("evaluate", cmd_evaluate, "compare augmenters against the baseline"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--train")
        p.add_argument("--schema")
        p.add_argument("--model", help="model.json from the train command")
        p.add_argument("--k-neighbors", type=int, default=5)
        if name == "augment":
            p.add_argument("--augmenter", choices=AUGMENTERS, default="none")
        else:
            p.add_argument("--test")
            p.add_argument("--augmenters", default="", help="comma-separated, e.g. smote,adasyn,comfortgan")
            p.add_argument("--repetitions", type=int, default=30)
            p.add_argument("--draws", type=int, default=30, help="draws per class for the distance metrics")
            p.add_argument("--n-trees", type=int, default=100)
            p.add_argument("--max-depth", type=int, default=10)
            p.add_argument("--jobs", type=int, default=1)
            p.add_argument("--dataset-name")
        p.set_defaults(func=func)

    p = sub.add_parser("toy", parents=[common], help="write the bundled synthetic comfort survey")
    p.add_argument("--rows", type=int, default=800)
    p.set_defaults(func=cmd_toy)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    known = vars(args)
    unknown = sorted(k for k in (k.replace("-", "_") for k in doc) if k not in known)
    if unknown:
        raise UsageError(f"unknown config key(s): {unknown}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    subparser.set_defaults(**{k.replace("-", "_"): v for k, v in doc.items()})
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        status = args.func(args)
        _sidecar(Path(args.out), argv)
        return status
    except (UsageError, dataio.LoadError, dataio.SchemaError, encode.EncodeError, gan.TrainingError, KeyError, ValueError) as exc:
        print(f"comfortgan: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
