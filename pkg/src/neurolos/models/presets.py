"""Tuned model configurations used as the benchmark defaults.

These are the hyperparameter values the reference study selected for each
model family after its search; the bundled demo experiment loads them as
the one-command reproduction path.  ``model_kinds()`` lists the names the
experiment config and CLI accept.
"""
from __future__ import annotations

from .boosting import BoostConfig
from .forest import ForestConfig
from .knn import KnnConfig
from .svm import SvmConfig
from .tree import TreeConfig
from ..errors import ValidationError


def tuned_config(kind: str, seed: int = 0):
    """Tuned configuration for one model kind."""
    if kind == "knn":
        return KnnConfig(k=35, weighting="distance", metric="euclidean")
    if kind == "svm":
        return SvmConfig(C=0.104, epochs=10, seed=seed)
    if kind == "forest":
        return ForestConfig(
            n_estimators=943,
            tree=TreeConfig(criterion="gini", max_depth=26, min_samples_split=5,
                            min_samples_leaf=1, max_features="sqrt"),
            bootstrap=True, seed=seed)
    if kind == "boost-depthwise":
        return BoostConfig(
            n_rounds=450, max_depth=13, learning_rate=0.0116, subsample=0.8961,
            colsample_by_tree=0.5711, min_split_gain=0.0033, l1=1.5189,
            l2=1.4634, min_child_weight=4.0, growth="depthwise", seed=seed)
    if kind == "boost-oblivious":
        return BoostConfig(
            n_rounds=1415, max_depth=6, learning_rate=0.1342, l2=1.8871,
            border_count=145, bagging_temperature=0.4268,
            split_score_noise=1.7541, growth="oblivious", seed=seed)
    raise ValidationError(f"unknown model kind {kind!r}")


def model_kinds() -> tuple[str, ...]:
    return ("knn", "svm", "forest", "boost-depthwise", "boost-oblivious")
