"""Decision tree classifier built on the split-scan kernels.

Greedy CART-style growth: each node scans a (possibly subsampled) set of
candidate features for the split with the largest impurity decrease,
recursing until depth, sample-count or purity limits stop it.  Leaves keep
their class counts so predictions can expose distributions, and every
accepted split contributes its size-weighted gain to per-feature
importances.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .. import kernels
from ..errors import TrainingError, ValidationError

#: class count of the LOS problem; configs default to it
N_CLASSES = 3

_CRITERIA = ("gini", "entropy")


@dataclasses.dataclass
class ClassDistribution:
    """Per-class probabilities backed by raw counts."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if (self.counts < 0).any() or self.counts.sum() <= 0:
            raise ValidationError("counts must be nonnegative with a positive sum")

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.counts.sum()


def impurity(dist, criterion: str = "gini") -> float:
    """Gini or entropy of a class distribution (probabilities or counts)."""
    if criterion not in _CRITERIA:
        raise ValidationError(f"criterion must be one of {_CRITERIA}, got {criterion!r}")
    if isinstance(dist, ClassDistribution):
        p = dist.probabilities
    else:
        p = np.asarray(dist, dtype=np.float64)
        if (p < 0).any():
            raise ValidationError("distribution entries must be nonnegative")
        total = p.sum()
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            p = p / total  # counts were passed
    if criterion == "gini":
        return float(1.0 - np.sum(p * p))
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


@dataclasses.dataclass
class TreeConfig:
    criterion: str = "gini"
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: str | int | float = "all"
    n_classes: int = N_CLASSES

    def validate(self) -> None:
        if self.criterion not in _CRITERIA:
            raise ValidationError(
                f"criterion must be one of {_CRITERIA}, got {self.criterion!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ValidationError(
                f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.min_samples_leaf < 1:
            raise ValidationError(
                f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if isinstance(self.max_features, str):
            if self.max_features not in ("all", "sqrt", "log2"):
                raise ValidationError(
                    f"max_features must be 'all', 'sqrt', 'log2', an int or a "
                    f"fraction, got {self.max_features!r}")
        elif isinstance(self.max_features, bool) or not isinstance(
                self.max_features, (int, float)):
            raise ValidationError(f"bad max_features {self.max_features!r}")
        elif isinstance(self.max_features, int) and self.max_features < 1:
            raise ValidationError(f"max_features int must be >= 1, got {self.max_features}")
        elif isinstance(self.max_features, float) and not 0.0 < self.max_features <= 1.0:
            raise ValidationError(
                f"max_features fraction must be in (0, 1], got {self.max_features}")
        if self.n_classes < 2:
            raise ValidationError(f"n_classes must be >= 2, got {self.n_classes}")

    def n_candidates(self, n_features: int) -> int:
        if self.max_features == "all":
            return n_features
        if self.max_features == "sqrt":
            return max(1, int(math.sqrt(n_features)))
        if self.max_features == "log2":
            return max(1, int(math.log2(n_features)))
        if isinstance(self.max_features, int):
            return min(self.max_features, n_features)
        return max(1, int(self.max_features * n_features))


class TreeModel:
    """A fitted (or fittable) decision tree.

    Nodes live in parallel arrays; ``feature[i] == -1`` marks a leaf.  Rows
    with ``x[feature] <= threshold`` descend left.
    """

    kind = "tree"

    def __init__(self, config: TreeConfig | None = None):
        self.config = config or TreeConfig()
        self.config.validate()
        self._feature = None
        self._threshold = None
        self._left = None
        self._right = None
        self._counts = None
        self.raw_importance_ = None
        self.n_features_ = None
        self.depth_ = None

    @property
    def is_fitted(self) -> bool:
        return self._feature is not None

    @property
    def n_nodes(self) -> int:
        return 0 if self._feature is None else len(self._feature)

    def fit(self, X, y, rng=None) -> "TreeModel":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValidationError("X must be (n, d) with y of length n")
        if X.shape[0] == 0:
            raise ValidationError("cannot fit on an empty dataset")
        cfg = self.config
        if y.min() < 0 or y.max() >= cfg.n_classes:
            raise ValidationError(
                f"labels must lie in [0, {cfg.n_classes}), got range "
                f"[{y.min()}, {y.max()}]")
        if rng is None:
            rng = np.random.default_rng(0)

        n, d = X.shape
        m = cfg.n_candidates(d)
        feature, threshold = [], []
        left, right, counts = [], [], []
        importance = np.zeros(d)
        max_depth_seen = 0

        def new_node() -> int:
            feature.append(-1)
            threshold.append(np.nan)
            left.append(-1)
            right.append(-1)
            counts.append(None)
            return len(feature) - 1

        stack = [(np.arange(n), 0, new_node())]
        while stack:
            idx, depth, node = stack.pop()
            max_depth_seen = max(max_depth_seen, depth)
            node_counts = np.bincount(y[idx], minlength=cfg.n_classes).astype(np.float64)
            counts[node] = node_counts

            if (node_counts.max() == idx.size
                    or idx.size < cfg.min_samples_split
                    or (cfg.max_depth is not None and depth >= cfg.max_depth)):
                continue

            if m < d:
                feats = np.sort(rng.choice(d, size=m, replace=False))
            else:
                feats = np.arange(d)
            sub = np.ascontiguousarray(X[np.ix_(idx, feats)])
            f_pos, gain, thr, _ = kernels.best_split_classification_multi(
                sub, y[idx], cfg.n_classes, cfg.criterion, cfg.min_samples_leaf)
            if f_pos < 0 or gain <= 0.0:
                continue

            f = int(feats[f_pos])
            go_left = X[idx, f] <= thr
            importance[f] += (idx.size / n) * gain
            feature[node] = f
            threshold[node] = thr
            left[node] = lid = new_node()
            right[node] = rid = new_node()
            stack.append((idx[go_left], depth + 1, lid))
            stack.append((idx[~go_left], depth + 1, rid))

        self._feature = np.array(feature, dtype=np.int64)
        self._threshold = np.array(threshold, dtype=np.float64)
        self._left = np.array(left, dtype=np.int64)
        self._right = np.array(right, dtype=np.int64)
        self._counts = np.vstack(counts)
        self.raw_importance_ = importance
        self.n_features_ = d
        self.depth_ = max_depth_seen
        return self

    def _leaf_of(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            alive = np.flatnonzero(self._feature[node] >= 0)
            if alive.size == 0:
                return node
            cur = node[alive]
            go_left = X[alive, self._feature[cur]] <= self._threshold[cur]
            node[alive] = np.where(go_left, self._left[cur], self._right[cur])

    def predict_proba(self, X) -> np.ndarray:
        self._require_fitted()
        counts = self._counts[self._leaf_of(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        self._require_fitted()
        return np.argmax(self._counts[self._leaf_of(X)], axis=1)

    def leaf_distribution(self, x) -> ClassDistribution:
        """Class counts of the leaf a single row lands in."""
        self._require_fitted()
        node = int(self._leaf_of(np.asarray(x, dtype=np.float64)[None, :])[0])
        return ClassDistribution(self._counts[node].copy())

    def feature_importances(self) -> np.ndarray:
        self._require_fitted()
        total = self.raw_importance_.sum()
        if total <= 0:
            return np.zeros_like(self.raw_importance_)
        return self.raw_importance_ / total

    def _require_fitted(self):
        if not self.is_fitted:
            raise TrainingError("model is not fitted")

    def _state_arrays(self) -> dict:
        self._require_fitted()
        return {"feature": self._feature, "threshold": self._threshold,
                "left": self._left, "right": self._right, "counts": self._counts,
                "importance": self.raw_importance_}

    def _load_arrays(self, arrays: dict) -> None:
        self._feature = np.asarray(arrays["feature"], dtype=np.int64)
        self._threshold = np.asarray(arrays["threshold"], dtype=np.float64)
        self._left = np.asarray(arrays["left"], dtype=np.int64)
        self._right = np.asarray(arrays["right"], dtype=np.int64)
        self._counts = np.asarray(arrays["counts"], dtype=np.float64)
        self.raw_importance_ = np.asarray(arrays["importance"], dtype=np.float64)
        self.n_features_ = self.raw_importance_.shape[0]
        self.depth_ = None


def tree_fit(train, config: TreeConfig | None = None, rng=None) -> TreeModel:
    """Fit a tree on a dataset object carrying ``X`` and ``y``."""
    return TreeModel(config).fit(train.X, train.y, rng=rng)
