"""k-nearest-neighbor classifier with brute-force distances.

Distances are computed in query chunks against the full training set, so
memory stays bounded while the inner work remains vectorized.  Votes are
either uniform over the k nearest neighbors or weighted by inverse
distance; a query that coincides exactly with a training point takes that
point's class under distance weighting.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .tree import N_CLASSES
from ..errors import TrainingError, ValidationError

_WEIGHTINGS = ("uniform", "distance")
_METRICS = ("euclidean", "manhattan")

#: soft cap on elements per distance block (rows x train x features)
_CHUNK_ELEMENTS = 8_000_000


@dataclasses.dataclass
class KnnConfig:
    k: int = 5
    weighting: str = "uniform"
    metric: str = "euclidean"
    n_classes: int = N_CLASSES

    def validate(self) -> None:
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.weighting not in _WEIGHTINGS:
            raise ValidationError(
                f"weighting must be one of {_WEIGHTINGS}, got {self.weighting!r}")
        if self.metric not in _METRICS:
            raise ValidationError(
                f"metric must be one of {_METRICS}, got {self.metric!r}")
        if self.n_classes < 2:
            raise ValidationError(f"n_classes must be >= 2, got {self.n_classes}")


class KnnModel:
    """Lazy learner: fit stores the training set, predict scans it."""

    kind = "knn"

    def __init__(self, config: KnnConfig | None = None):
        self.config = config or KnnConfig()
        self.config.validate()
        self._X = None
        self._y = None

    @property
    def is_fitted(self) -> bool:
        return self._X is not None

    def fit(self, X, y) -> "KnnModel":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValidationError("X must be (n, d) with y of length n")
        if X.shape[0] == 0:
            raise ValidationError("cannot fit on an empty dataset")
        if self.config.k > X.shape[0]:
            raise ValidationError(
                f"k={self.config.k} exceeds the {X.shape[0]} training rows")
        self._X = X
        self._y = y
        return self

    def _distances(self, queries: np.ndarray) -> np.ndarray:
        diff = queries[:, None, :] - self._X[None, :, :]
        if self.config.metric == "euclidean":
            return np.sqrt(np.sum(diff * diff, axis=2))
        return np.sum(np.abs(diff), axis=2)

    def predict(self, X) -> np.ndarray:
        if not self.is_fitted:
            raise TrainingError("model is not fitted")
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self._X.shape[1]:
            raise ValidationError(
                f"queries must have {self._X.shape[1]} columns")
        cfg = self.config
        n_train, d = self._X.shape
        chunk = max(1, _CHUNK_ELEMENTS // max(1, n_train * d))
        out = np.empty(X.shape[0], dtype=np.int64)
        for start in range(0, X.shape[0], chunk):
            block = X[start:start + chunk]
            dist = self._distances(block)
            order = np.argsort(dist, axis=1, kind="stable")[:, :cfg.k]
            rows = np.arange(block.shape[0])[:, None]
            near_labels = self._y[order]
            near_dist = dist[rows, order]
            if cfg.weighting == "uniform":
                votes = np.zeros((block.shape[0], cfg.n_classes))
                np.add.at(votes, (rows, near_labels), 1.0)
                out[start:start + chunk] = np.argmax(votes, axis=1)
            else:
                scores = np.zeros((block.shape[0], cfg.n_classes))
                exact = near_dist[:, 0] == 0.0
                with np.errstate(divide="ignore"):
                    weights = np.where(near_dist > 0.0, 1.0 / near_dist, 0.0)
                np.add.at(scores, (rows, near_labels), weights)
                pred = np.argmax(scores, axis=1)
                # a zero-distance neighbor decides outright; the stable sort
                # puts the lowest-index exact match first
                pred[exact] = near_labels[exact, 0]
                out[start:start + chunk] = pred
        return out

    def _state_arrays(self) -> dict:
        if not self.is_fitted:
            raise TrainingError("model is not fitted")
        return {"train_X": self._X, "train_y": self._y}

    def _load_arrays(self, arrays: dict) -> None:
        self._X = np.ascontiguousarray(arrays["train_X"], dtype=np.float64)
        self._y = np.ascontiguousarray(arrays["train_y"], dtype=np.int64)


def knn_predict(train, queries, config: KnnConfig | None = None) -> np.ndarray:
    """One-shot prediction from a dataset object carrying ``X`` and ``y``."""
    return KnnModel(config).fit(train.X, train.y).predict(queries)
