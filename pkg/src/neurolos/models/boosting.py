"""Second-order gradient boosting with two tree-growth modes.

Multiclass boosting trains one regression tree per class per round on the
first and second derivatives of the softmax cross-entropy; scores start at
the log class priors and accumulate ``learning_rate`` times each tree's
leaf weights.  Leaf weights come from the closed form
``-T_alpha(G) / (H + lambda)`` where ``T_alpha`` soft-thresholds the
gradient sum (the L1 term), and a split is kept only when its gain exceeds
``min_split_gain``.

Growth modes:

``depthwise``
    Greedy exact scan per node via the split kernels, to ``max_depth``.

``oblivious``
    Balanced trees with one shared (feature, threshold) per level, chosen
    on quantized feature histograms (``border_count`` borders).  Optional
    gamma-distributed row weights (``bagging_temperature``) and Gaussian
    split-score noise (``split_score_noise``) randomize tree construction
    the way Bayesian-bootstrap boosting implementations do.
"""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .tree import N_CLASSES
from .. import kernels
from ..errors import TrainingError, ValidationError

_GROWTH_MODES = ("depthwise", "oblivious")

#: 2**depth leaves make deeper oblivious trees infeasible
OBLIVIOUS_DEPTH_CAP = 16


def leaf_weight(G: float, H: float, lam: float, alpha: float = 0.0) -> float:
    """Closed-form optimal leaf value ``-T_alpha(G) / (H + lam)``."""
    denom = H + lam
    if denom <= 0.0:
        return 0.0
    if alpha > 0.0:
        if G > alpha:
            t = G - alpha
        elif G < -alpha:
            t = G + alpha
        else:
            t = 0.0
    else:
        t = G
    return -t / denom


def _soft_threshold(G: np.ndarray, alpha: float) -> np.ndarray:
    if alpha <= 0.0:
        return G
    return np.where(G > alpha, G - alpha,
                    np.where(G < -alpha, G + alpha, 0.0))


def _score(G: np.ndarray, H: np.ndarray, lam: float, alpha: float) -> np.ndarray:
    t = _soft_threshold(G, alpha)
    denom = H + lam
    return np.where(denom > 0.0, t * t / np.where(denom > 0.0, denom, 1.0), 0.0)


def _leaf_weights(G: np.ndarray, H: np.ndarray, lam: float,
                  alpha: float) -> np.ndarray:
    denom = H + lam
    return np.where(denom > 0.0,
                    -_soft_threshold(G, alpha) / np.where(denom > 0.0, denom, 1.0),
                    0.0)


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax."""
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


@dataclasses.dataclass
class BoostConfig:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 6
    l2: float = 1.0
    l1: float = 0.0
    min_split_gain: float = 0.0
    subsample: float = 1.0
    colsample_by_tree: float = 1.0
    min_child_weight: float = 0.0
    growth: str = "depthwise"
    bagging_temperature: float = 0.0
    border_count: int = 255
    split_score_noise: float = 0.0
    n_classes: int = N_CLASSES
    seed: int = 0

    def validate(self) -> None:
        if self.n_rounds < 1:
            raise ValidationError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if not 0.0 <= self.learning_rate <= 1.0:
            raise ValidationError(
                f"learning_rate must lie in [0, 1], got {self.learning_rate}")
        if self.growth not in _GROWTH_MODES:
            raise ValidationError(
                f"growth must be one of {_GROWTH_MODES}, got {self.growth!r}")
        if self.max_depth < 1:
            raise ValidationError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.growth == "oblivious" and self.max_depth > OBLIVIOUS_DEPTH_CAP:
            raise ValidationError(
                f"oblivious max_depth is capped at {OBLIVIOUS_DEPTH_CAP}, "
                f"got {self.max_depth}")
        for name in ("l2", "l1", "min_split_gain", "min_child_weight",
                     "bagging_temperature", "split_score_noise"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("subsample", "colsample_by_tree"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValidationError(
                    f"{name} must lie in (0, 1], got {getattr(self, name)}")
        if self.border_count < 2:
            raise ValidationError(f"border_count must be >= 2, got {self.border_count}")
        if self.n_classes < 2:
            raise ValidationError(f"n_classes must be >= 2, got {self.n_classes}")


class GradTree:
    """Depthwise regression tree over gradient statistics."""

    def __init__(self, feature, threshold, left, right, weight):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.weight = np.asarray(weight, dtype=np.float64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            alive = np.flatnonzero(self.feature[node] >= 0)
            if alive.size == 0:
                return self.weight[node]
            cur = node[alive]
            go_left = X[alive, self.feature[cur]] <= self.threshold[cur]
            node[alive] = np.where(go_left, self.left[cur], self.right[cur])

    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())


class ObliviousTree:
    """Balanced tree: one (feature, threshold) per level, 2**L leaf weights."""

    def __init__(self, features, thresholds, weights):
        self.features = np.asarray(features, dtype=np.int64)
        self.thresholds = np.asarray(thresholds, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.int64)
        for f, t in zip(self.features, self.thresholds):
            idx = idx * 2 + (X[:, f] > t)
        return self.weights[idx]

    def n_leaves(self) -> int:
        return self.weights.shape[0]


def fit_gradient_tree(X, g, h, cfg: BoostConfig, cols=None, importance=None,
                      rng=None):
    """Fit one regression tree to per-row gradient/hessian statistics.

    ``X`` holds only the candidate columns; ``cols`` maps those positions
    back to global feature indices (stored in the tree, so prediction runs
    on the full matrix).  Gains of accepted splits accumulate into
    ``importance`` under the global index.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    if cols is None:
        cols = np.arange(X.shape[1])
    if importance is None:
        importance = np.zeros(int(np.max(cols)) + 1 if len(cols) else 1)

    feature, threshold, left, right, weight = [], [], [], [], []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        weight.append(0.0)
        return len(feature) - 1

    stack = [(np.arange(X.shape[0]), 0, new_node())]
    while stack:
        idx, depth, node = stack.pop()
        weight[node] = leaf_weight(float(g[idx].sum()), float(h[idx].sum()),
                                   cfg.l2, cfg.l1)
        if depth >= cfg.max_depth or idx.size < 2:
            continue
        sub = np.ascontiguousarray(X[idx])
        f_pos, gain, thr, _ = kernels.best_split_grad_multi(
            sub, g[idx], h[idx], lam=cfg.l2, alpha=cfg.l1, min_leaf=1,
            min_child_weight=cfg.min_child_weight)
        if f_pos < 0 or gain <= cfg.min_split_gain:
            continue
        importance[cols[f_pos]] += gain
        go_left = X[idx, f_pos] <= thr
        feature[node] = int(cols[f_pos])
        threshold[node] = thr
        left[node] = lid = new_node()
        right[node] = rid = new_node()
        stack.append((idx[go_left], depth + 1, lid))
        stack.append((idx[~go_left], depth + 1, rid))

    return GradTree(feature, threshold, left, right, weight)


def _feature_borders(column: np.ndarray, border_count: int) -> np.ndarray:
    """Row-quantile split thresholds for one feature, at most border_count."""
    u = np.unique(column)
    if u.size < 2:
        return np.empty(0)
    mids = (u[:-1] + u[1:]) / 2.0
    if mids.size <= border_count:
        return mids
    sc = np.sort(column)
    cuts = np.round(np.linspace(0, sc.size, border_count + 1)).astype(np.int64)[1:-1]
    vals = sc[np.clip(cuts, 0, sc.size - 1)]
    return np.unique(vals[vals < sc[-1]])


def fit_oblivious_tree(binned, g, h, borders, cols, cfg: BoostConfig,
                       importance, rng):
    """Grow one oblivious tree on pre-quantized features.

    ``binned`` holds bin indices for the candidate columns only; per level
    the (feature, border) pair maximizing the summed leaf gains is shared
    by every node.  Score noise perturbs only the choice of split, never
    the accepted gain.
    """
    n = binned.shape[0]
    node_id = np.zeros(n, dtype=np.int64)
    chosen_f, chosen_t = [], []

    for level in range(cfg.max_depth):
        n_leaves = 1 << level
        G_leaf = np.bincount(node_id, weights=g, minlength=n_leaves)
        H_leaf = np.bincount(node_id, weights=h, minlength=n_leaves)
        parent = _score(G_leaf, H_leaf, cfg.l2, cfg.l1)

        best_key = -np.inf
        best = None  # (f_pos, border_pos, true_gain)
        for f_pos in range(binned.shape[1]):
            f_borders = borders[cols[f_pos]]
            nb = f_borders.shape[0] + 1
            if nb < 2:
                continue
            comb = node_id * nb + binned[:, f_pos]
            Gh = np.bincount(comb, weights=g, minlength=n_leaves * nb)
            Hh = np.bincount(comb, weights=h, minlength=n_leaves * nb)
            Gl = Gh.reshape(n_leaves, nb).cumsum(axis=1)[:, :-1]
            Hl = Hh.reshape(n_leaves, nb).cumsum(axis=1)[:, :-1]
            Gr = G_leaf[:, None] - Gl
            Hr = H_leaf[:, None] - Hl
            ok = (Hl >= cfg.min_child_weight) & (Hr >= cfg.min_child_weight)
            contrib = np.where(
                ok,
                0.5 * (_score(Gl, Hl, cfg.l2, cfg.l1)
                       + _score(Gr, Hr, cfg.l2, cfg.l1) - parent[:, None]),
                0.0)
            total = contrib.sum(axis=0)
            if cfg.split_score_noise > 0.0:
                keyed = total + cfg.split_score_noise * rng.standard_normal(total.shape[0])
            else:
                keyed = total
            t_pos = int(np.argmax(keyed))
            if keyed[t_pos] > best_key:
                best_key = float(keyed[t_pos])
                best = (f_pos, t_pos, float(total[t_pos]))

        if best is None or best[2] <= cfg.min_split_gain:
            break
        f_pos, t_pos, true_gain = best
        importance[cols[f_pos]] += true_gain
        chosen_f.append(int(cols[f_pos]))
        chosen_t.append(float(borders[cols[f_pos]][t_pos]))
        node_id = node_id * 2 + (binned[:, f_pos] > t_pos)

    n_leaves = 1 << len(chosen_f)
    G = np.bincount(node_id, weights=g, minlength=n_leaves)
    H = np.bincount(node_id, weights=h, minlength=n_leaves)
    return ObliviousTree(chosen_f, chosen_t, _leaf_weights(G, H, cfg.l2, cfg.l1))


class BoostModel:
    kind = "boost"

    def __init__(self, config: BoostConfig | None = None):
        self.config = config or BoostConfig()
        self.config.validate()
        self.trees: list[list] | None = None
        self.base_score_ = None
        self.raw_importance_ = None
        self.train_loss_ = None

    @property
    def is_fitted(self) -> bool:
        return self.trees is not None

    def fit(self, X, y, threads: int = 1) -> "BoostModel":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValidationError("X must be (n, d) with y of length n")
        cfg = self.config
        if y.min() < 0 or y.max() >= cfg.n_classes:
            raise ValidationError(
                f"labels must lie in [0, {cfg.n_classes})")
        n, d = X.shape
        C = cfg.n_classes
        onehot = np.zeros((n, C))
        onehot[np.arange(n), y] = 1.0

        priors = np.bincount(y, minlength=C) / n
        self.base_score_ = np.log(np.clip(priors, 1e-12, None))
        F = np.tile(self.base_score_, (n, 1))
        self.raw_importance_ = np.zeros(d)
        self.trees = []
        losses = [self._loss(F, y)]

        borders = None
        binned = None
        if cfg.growth == "oblivious":
            borders = [_feature_borders(X[:, f], cfg.border_count) for f in range(d)]
            binned = np.empty((n, d), dtype=np.int64)
            for f in range(d):
                binned[:, f] = np.searchsorted(borders[f], X[:, f], side="left")

        n_sub = max(1, int(round(cfg.subsample * n)))
        m_cols = max(1, int(round(cfg.colsample_by_tree * d)))

        for m in range(cfg.n_rounds):
            P = softmax(F)
            rng_m = np.random.default_rng([cfg.seed, m])
            rows = np.sort(rng_m.permutation(n)[:n_sub]) if n_sub < n else np.arange(n)
            if cfg.bagging_temperature > 0.0:
                wgt = rng_m.gamma(1.0 / cfg.bagging_temperature, 1.0, size=rows.shape[0])
            else:
                wgt = None

            def fit_class(k: int):
                # local importance buffer: summed in class order afterwards
                # so thread scheduling cannot reorder float accumulation
                imp = np.zeros(d)
                rng_t = np.random.default_rng([cfg.seed, m, k])
                if m_cols < d:
                    cols = np.sort(rng_t.choice(d, size=m_cols, replace=False))
                else:
                    cols = np.arange(d)
                g = P[rows, k] - onehot[rows, k]
                h = P[rows, k] * (1.0 - P[rows, k])
                if wgt is not None:
                    g = g * wgt
                    h = h * wgt
                if cfg.growth == "depthwise":
                    tree = fit_gradient_tree(X[np.ix_(rows, cols)], g, h, cfg,
                                             cols=cols, importance=imp)
                else:
                    sub_binned = np.ascontiguousarray(binned[np.ix_(rows, cols)])
                    tree = fit_oblivious_tree(sub_binned, g, h, borders, cols,
                                              cfg, imp, rng_t)
                return tree, imp

            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(fit_class, range(C)))
            else:
                results = [fit_class(k) for k in range(C)]

            round_trees = []
            for k, (tree, imp) in enumerate(results):
                self.raw_importance_ += imp
                round_trees.append(tree)
                F[:, k] += cfg.learning_rate * tree.predict(X)
            self.trees.append(round_trees)
            losses.append(self._loss(F, y))

        self.train_loss_ = np.array(losses)
        return self

    @staticmethod
    def _loss(F: np.ndarray, y: np.ndarray) -> float:
        P = softmax(F)
        return float(-np.mean(np.log(np.clip(P[np.arange(len(y)), y], 1e-300, None))))

    def decision_scores(self, X) -> np.ndarray:
        self._require_fitted()
        X = np.ascontiguousarray(X, dtype=np.float64)
        F = np.tile(self.base_score_, (X.shape[0], 1))
        for round_trees in self.trees:
            for k, tree in enumerate(round_trees):
                F[:, k] += self.config.learning_rate * tree.predict(X)
        return F

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_scores(X))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_scores(X), axis=1)

    def feature_importances(self) -> np.ndarray:
        self._require_fitted()
        total = self.raw_importance_.sum()
        return self.raw_importance_ / total if total > 0 else self.raw_importance_

    def _require_fitted(self):
        if not self.is_fitted:
            raise TrainingError("model is not fitted")

    def _state_arrays(self) -> dict:
        self._require_fitted()
        arrays = {"base_score": self.base_score_,
                  "importance": self.raw_importance_,
                  "train_loss": self.train_loss_}
        for m, round_trees in enumerate(self.trees):
            for k, tree in enumerate(round_trees):
                tag = f"m{m}_k{k}"
                if isinstance(tree, GradTree):
                    arrays[f"{tag}_feature"] = tree.feature
                    arrays[f"{tag}_threshold"] = tree.threshold
                    arrays[f"{tag}_left"] = tree.left
                    arrays[f"{tag}_right"] = tree.right
                    arrays[f"{tag}_weight"] = tree.weight
                else:
                    arrays[f"{tag}_features"] = tree.features
                    arrays[f"{tag}_thresholds"] = tree.thresholds
                    arrays[f"{tag}_weights"] = tree.weights
        return arrays

    def _load_arrays(self, arrays: dict) -> None:
        cfg = self.config
        self.base_score_ = np.asarray(arrays["base_score"], dtype=np.float64)
        self.raw_importance_ = np.asarray(arrays["importance"], dtype=np.float64)
        self.train_loss_ = np.asarray(arrays["train_loss"], dtype=np.float64)
        self.trees = []
        for m in range(cfg.n_rounds):
            round_trees = []
            for k in range(cfg.n_classes):
                tag = f"m{m}_k{k}"
                if cfg.growth == "depthwise":
                    round_trees.append(GradTree(
                        arrays[f"{tag}_feature"], arrays[f"{tag}_threshold"],
                        arrays[f"{tag}_left"], arrays[f"{tag}_right"],
                        arrays[f"{tag}_weight"]))
                else:
                    round_trees.append(ObliviousTree(
                        arrays[f"{tag}_features"], arrays[f"{tag}_thresholds"],
                        arrays[f"{tag}_weights"]))
            self.trees.append(round_trees)


def boost_fit(train, config: BoostConfig | None = None,
              threads: int = 1) -> BoostModel:
    """Fit a boosting model on a dataset object carrying ``X`` and ``y``."""
    return BoostModel(config).fit(train.X, train.y, threads=threads)


def boost_predict(model: BoostModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Predicted classes plus class probability scores."""
    scores = model.predict_proba(X)
    return np.argmax(scores, axis=1), scores
