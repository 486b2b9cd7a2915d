"""Random forest: bootstrapped trees with majority voting.

Each tree draws its own bootstrap resample and feature subsets from a
stream keyed by ``(seed, tree index)``, so fitting is reproducible no
matter how many threads run or in which order trees finish.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .tree import TreeConfig, TreeModel
from ..errors import TrainingError, ValidationError


@dataclasses.dataclass
class ForestConfig:
    n_estimators: int = 100
    tree: TreeConfig = dataclasses.field(
        default_factory=lambda: TreeConfig(max_features="sqrt"))
    bootstrap: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.n_estimators < 1:
            raise ValidationError(
                f"n_estimators must be >= 1, got {self.n_estimators}")
        self.tree.validate()


class ForestModel:
    kind = "forest"

    def __init__(self, config: ForestConfig | None = None):
        self.config = config or ForestConfig()
        self.config.validate()
        self.trees: list[TreeModel] | None = None

    @property
    def is_fitted(self) -> bool:
        return self.trees is not None

    def fit(self, X, y, threads: int = 1) -> "ForestModel":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValidationError("X must be (n, d) with y of length n")
        cfg = self.config
        n = X.shape[0]

        def fit_one(b: int) -> TreeModel:
            rng = np.random.default_rng([cfg.seed, b])
            if cfg.bootstrap:
                rows = rng.integers(0, n, size=n)
            else:
                rows = np.arange(n)
            return TreeModel(dataclasses.replace(cfg.tree)).fit(X[rows], y[rows], rng=rng)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                self.trees = list(pool.map(fit_one, range(cfg.n_estimators)))
        else:
            self.trees = [fit_one(b) for b in range(cfg.n_estimators)]
        return self

    def _votes(self, X) -> np.ndarray:
        self._require_fitted()
        X = np.ascontiguousarray(X, dtype=np.float64)
        votes = np.zeros((X.shape[0], self.config.tree.n_classes))
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            votes[rows, tree.predict(X)] += 1.0
        return votes

    def predict(self, X) -> np.ndarray:
        return np.argmax(self._votes(X), axis=1)

    def predict_proba(self, X) -> np.ndarray:
        return self._votes(X) / len(self.trees)

    def feature_importances(self) -> np.ndarray:
        self._require_fitted()
        total = np.zeros_like(self.trees[0].raw_importance_)
        for tree in self.trees:
            total += tree.raw_importance_
        s = total.sum()
        return total / s if s > 0 else total

    def _require_fitted(self):
        if not self.is_fitted:
            raise TrainingError("model is not fitted")

    def _state_arrays(self) -> dict:
        self._require_fitted()
        arrays = {}
        for b, tree in enumerate(self.trees):
            for name, arr in tree._state_arrays().items():
                arrays[f"t{b}_{name}"] = arr
        return arrays

    def _load_arrays(self, arrays: dict) -> None:
        self.trees = []
        for b in range(self.config.n_estimators):
            tree = TreeModel(dataclasses.replace(self.config.tree))
            tree._load_arrays({name: arrays[f"t{b}_{name}"]
                               for name in ("feature", "threshold", "left",
                                            "right", "counts", "importance")})
            self.trees.append(tree)


def forest_fit(train, config: ForestConfig | None = None,
               threads: int = 1) -> ForestModel:
    """Fit a forest on a dataset object carrying ``X`` and ``y``."""
    return ForestModel(config).fit(train.X, train.y, threads=threads)


def forest_predict(model: ForestModel, X) -> np.ndarray:
    return model.predict(X)
