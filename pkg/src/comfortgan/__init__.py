"""Class-balancing of thermal comfort datasets with a conditional WGAN-GP."""

from .dataio import Column, Dataset, Schema, load_csv, save_csv, train_test_split
from .encode import Codec
from .evaluation import EvalReport, compare, render_table
from .forest import ForestConfig, RandomForest, f1_micro
from .gan import PRESETS, GanModel, TrainConfig, balance, sample, train

__version__ = "0.1.0"

__all__ = [
    "Codec",
    "Column",
    "Dataset",
    "EvalReport",
    "ForestConfig",
    "GanModel",
    "PRESETS",
    "RandomForest",
    "Schema",
    "TrainConfig",
    "balance",
    "compare",
    "f1_micro",
    "load_csv",
    "render_table",
    "sample",
    "save_csv",
    "train",
    "train_test_split",
]
