"""One-vs-rest linear SVM trained by primal subgradient descent.

Each class gets its own hinge-loss head: minimizing
``0.5 * ||w||^2 + C * sum(xi_i)`` is equivalent, after dividing by ``C n``,
to regularized empirical hinge risk with ``lambda = 1 / (C n)``.  The
per-step learning rate ``1 / (lambda t)`` is the standard schedule for
this objective; the bias term stays unregularized.  Prediction takes the
argmax of the per-class decision values.
"""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .tree import N_CLASSES
from ..errors import TrainingError, ValidationError

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class SvmConfig:
    C: float = 1.0
    epochs: int = 10
    seed: int = 0
    n_classes: int = N_CLASSES

    def validate(self) -> None:
        if self.C <= 0:
            raise ValidationError(f"C must be > 0, got {self.C}")
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.n_classes < 2:
            raise ValidationError(f"n_classes must be >= 2, got {self.n_classes}")


class SvmModel:
    kind = "svm"

    def __init__(self, config: SvmConfig | None = None):
        self.config = config or SvmConfig()
        self.config.validate()
        self.coef_ = None
        self.intercept_ = None

    @property
    def is_fitted(self) -> bool:
        return self.coef_ is not None

    def fit(self, X, y, threads: int = 1) -> "SvmModel":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValidationError("X must be (n, d) with y of length n")
        if X.shape[0] == 0:
            raise ValidationError("cannot fit on an empty dataset")
        cfg = self.config
        n, d = X.shape
        if n > 1:
            spread = np.abs(X).max() if X.size else 0.0
            if spread > 25.0:
                logger.warning(
                    "features reach magnitude %.3g; hinge-loss descent expects "
                    "scaled inputs", spread)

        lam = 1.0 / (cfg.C * n)

        def fit_head(k: int) -> tuple[np.ndarray, float]:
            rng = np.random.default_rng([cfg.seed, k])
            target = np.where(y == k, 1.0, -1.0)
            w = np.zeros(d)
            b = 0.0
            t = 0
            for _ in range(cfg.epochs):
                for i in rng.permutation(n):
                    t += 1
                    eta = 1.0 / (lam * t)
                    if target[i] * (X[i] @ w + b) < 1.0:
                        w *= 1.0 - eta * lam
                        w += eta * target[i] * X[i]
                        b += eta * target[i]
                    else:
                        w *= 1.0 - eta * lam
            return w, b

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                heads = list(pool.map(fit_head, range(cfg.n_classes)))
        else:
            heads = [fit_head(k) for k in range(cfg.n_classes)]
        self.coef_ = np.vstack([w for w, _ in heads])
        self.intercept_ = np.array([b for _, b in heads])
        return self

    def decision_function(self, X) -> np.ndarray:
        self._require_fitted()
        X = np.ascontiguousarray(X, dtype=np.float64)
        return X @ self.coef_.T + self.intercept_

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    def _require_fitted(self):
        if not self.is_fitted:
            raise TrainingError("model is not fitted")

    def _state_arrays(self) -> dict:
        self._require_fitted()
        return {"coef": self.coef_, "intercept": self.intercept_}

    def _load_arrays(self, arrays: dict) -> None:
        self.coef_ = np.asarray(arrays["coef"], dtype=np.float64)
        self.intercept_ = np.asarray(arrays["intercept"], dtype=np.float64)


def svm_fit(train, config: SvmConfig | None = None, threads: int = 1) -> SvmModel:
    """Fit a one-vs-rest linear SVM on a dataset carrying ``X`` and ``y``."""
    return SvmModel(config).fit(train.X, train.y, threads=threads)


def svm_predict(model: SvmModel, X) -> np.ndarray:
    return model.predict(X)
