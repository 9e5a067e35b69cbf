"""Spherical knowledge-graph embeddings: training, evaluation, analysis.

Thin Python facade over the C++ core. Scores are distances (lower is
better); spherical model scores are bounded by the sphere diameter 2R.
"""

from skge._core import (
    Dataset,
    Model,
    chord_distance,
    evaluate,
    evaluate_by_category,
    init_model,
    knn,
    load_checkpoint,
    load_dataset,
    load_dataset_dir,
    negative_score_distribution,
    paired_ttest,
    project_to_sphere,
    save_checkpoint,
    spherize,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Model",
    "chord_distance",
    "evaluate",
    "evaluate_by_category",
    "init_model",
    "knn",
    "load_checkpoint",
    "load_dataset",
    "load_dataset_dir",
    "negative_score_distribution",
    "paired_ttest",
    "project_to_sphere",
    "save_checkpoint",
    "spherize",
    "train",
    "__version__",
]
