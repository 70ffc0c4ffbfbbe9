"""Subset-of-data variational inference for GP and deep GP regression."""

from ._core import (
    Dataset,
    Metrics,
    Model,
    TrainHistory,
    evaluate,
    load_csv,
    load_model,
    run_cli,
    train,
)

__all__ = [
    "Dataset",
    "Metrics",
    "Model",
    "TrainHistory",
    "evaluate",
    "load_csv",
    "load_model",
    "run_cli",
    "train",
]
