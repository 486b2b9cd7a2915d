"""Feature pipeline between the static mart and the models.

Turns mart rows into an all-numeric design matrix (one-hot categoricals,
z-scored continuous columns), splits it with per-class stratification,
balances training data with SMOTE, and prunes columns by recursive feature
elimination.  Scaling statistics and category levels are fitted on a
caller-chosen row subset (the training rows) and stored with the dataset,
so test rows never contribute to them.
"""
from __future__ import annotations

import dataclasses
import logging

import numpy as np
import pandas as pd

from .errors import DataError, UnsupportedModelError, ValidationError
from .evaluation import cross_validate

logger = logging.getLogger(__name__)

ID_COLUMNS = ("hadm_id", "stay_id")
LABEL_COLUMN = "label"


@dataclasses.dataclass
class Dataset:
    """Design matrix plus labels and per-row provenance."""

    X: np.ndarray              # (n, d) float64
    y: np.ndarray              # (n,) int64 class codes
    columns: list[str]
    synthetic: np.ndarray      # (n,) bool, True for SMOTE rows
    stay_ids: np.ndarray | None = None
    folds: np.ndarray | None = None
    codec: dict | None = None

    def __post_init__(self):
        if self.X.shape[0] != self.y.shape[0]:
            raise ValidationError(
                f"row count {self.X.shape[0]} != label count {self.y.shape[0]}")
        if self.X.shape[1] != len(self.columns):
            raise ValidationError(
                f"matrix has {self.X.shape[1]} columns but {len(self.columns)} names")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=3)

    def take(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(
            X=self.X[indices], y=self.y[indices], columns=self.columns,
            synthetic=self.synthetic[indices],
            stay_ids=None if self.stay_ids is None else self.stay_ids[indices],
            folds=None if self.folds is None else self.folds[indices],
            codec=self.codec)

    def select_columns(self, keep) -> "Dataset":
        keep = np.asarray(keep)
        return Dataset(
            X=self.X[:, keep], y=self.y, columns=[self.columns[i] for i in keep],
            synthetic=self.synthetic, stay_ids=self.stay_ids, folds=self.folds,
            codec=self.codec)


@dataclasses.dataclass
class SplitSpec:
    test_fraction: float
    seed: int = 0
    stratify: bool = True

    def validate(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError(
                f"test_fraction must be in (0, 1), got {self.test_fraction}")


def encode_and_scale(mart, fit_rows=None, codec: dict | None = None) -> Dataset:
    """Design matrix from a static mart (or its frame).

    Categorical (object) columns become one-hot indicators, numeric columns
    are z-scored, and columns constant on the fit rows are dropped with a
    warning.  ``fit_rows`` selects the rows that define levels, means and
    stds (default all rows); pass a stored ``codec`` instead to re-apply an
    earlier fit.
    """
    frame = mart.frame if hasattr(mart, "frame") else mart
    if len(frame) == 0:
        raise DataError("cannot encode an empty mart")
    if LABEL_COLUMN not in frame.columns:
        raise DataError(f"mart frame lacks the {LABEL_COLUMN!r} column")

    y = frame[LABEL_COLUMN].to_numpy(dtype=np.int64)
    stay_ids = frame["stay_id"].to_numpy(dtype=np.int64) \
        if "stay_id" in frame.columns else None
    feature_cols = [c for c in frame.columns
                    if c not in ID_COLUMNS and c != LABEL_COLUMN]

    fit_frame = frame.iloc[fit_rows] if fit_rows is not None else frame

    if codec is None:
        codec = {"levels": {}, "numeric": {}, "dropped": []}
        for col in feature_cols:
            if frame[col].dtype == object:
                codec["levels"][col] = sorted(fit_frame[col].unique())
            else:
                values = fit_frame[col].to_numpy(dtype=np.float64)
                codec["numeric"][col] = [float(values.mean()), float(values.std())]

    parts: list[np.ndarray] = []
    names: list[str] = []
    dropped: list[str] = []
    for col in feature_cols:
        if col in codec["levels"]:
            raw = frame[col].to_numpy()
            for level in codec["levels"][col]:
                parts.append((raw == level).astype(np.float64))
                names.append(f"{col}={level}")
        elif col in codec["numeric"]:
            mean, std = codec["numeric"][col]
            if std == 0.0:
                dropped.append(col)
                continue
            parts.append((frame[col].to_numpy(dtype=np.float64) - mean) / std)
            names.append(col)

    # one-hot columns constant on the fit rows (single observed level) go too
    keep = []
    fit_index = np.arange(len(frame)) if fit_rows is None else np.asarray(fit_rows)
    for i, name in enumerate(names):
        if codec.get("columns") is not None:
            keep.append(i if name in codec["columns"] else -1)
            continue
        if parts[i][fit_index].std() == 0.0:
            dropped.append(name)
        else:
            keep.append(i)
    keep = [i for i in keep if i >= 0]

    if "columns" not in codec:
        codec["dropped"] = sorted(set(codec.get("dropped", []) + dropped))
        codec["columns"] = [names[i] for i in keep]
        if dropped:
            logger.warning("dropped %d constant columns: %s", len(dropped), dropped)

    X = np.column_stack([parts[i] for i in keep]) if keep else \
        np.empty((len(frame), 0))
    return Dataset(X=X, y=y, columns=[names[i] for i in keep],
                   synthetic=np.zeros(len(frame), dtype=bool),
                   stay_ids=stay_ids, codec=codec)


def stratified_indices(labels, test_fraction: float, seed: int = 0,
                       stratify: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint (train, test) row indices; per-class allocation when stratified."""
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    if not stratify:
        order = rng.permutation(labels.shape[0])
        n_test = int(round(labels.shape[0] * test_fraction))
        return np.sort(order[n_test:]), np.sort(order[:n_test])

    train_parts, test_parts = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise ValidationError(f"class {c} has {idx.size} row(s); need >= 2 to split")
        rng.shuffle(idx)
        n_test = int(round(idx.size * test_fraction))
        test_parts.append(idx[:n_test])
        train_parts.append(idx[n_test:])
    return (np.sort(np.concatenate(train_parts)),
            np.sort(np.concatenate(test_parts)))


def stratified_split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Split a dataset into disjoint train and test parts."""
    spec.validate()
    train_idx, test_idx = stratified_indices(ds.y, spec.test_fraction, spec.seed,
                                             spec.stratify)
    return ds.take(train_idx), ds.take(test_idx)


def smote_oversample(train: Dataset, k_neighbors: int = 5, seed: int = 0) -> Dataset:
    """Balance classes by interpolating synthetic minority rows.

    Each minority class is raised to the majority count with
    ``x_new = x + lambda * (x_nb - x)`` where ``x_nb`` is one of the ``k``
    nearest same-class real rows and ``lambda ~ U(0, 1)``.  Synthetic rows
    are flagged so downstream splits can exclude them.
    """
    if k_neighbors < 1:
        raise ValidationError(f"k_neighbors must be >= 1, got {k_neighbors}")
    counts = train.class_counts()
    majority = int(counts.max())
    rng = np.random.default_rng(seed)

    new_X, new_y = [], []
    for c in range(counts.shape[0]):
        if counts[c] == 0 or counts[c] == majority:
            continue
        pool = train.X[(train.y == c) & ~train.synthetic]
        if pool.shape[0] <= k_neighbors:
            raise ValidationError(
                f"class {c} has only {pool.shape[0]} real rows; "
                f"k_neighbors={k_neighbors} requires more — use a smaller k")
        n_new = majority - int(counts[c])
        # k nearest same-class neighbors, self excluded
        d2 = np.sum((pool[:, None, :] - pool[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k_neighbors]

        base = rng.integers(0, pool.shape[0], size=n_new)
        pick = rng.integers(0, k_neighbors, size=n_new)
        lam = rng.random(n_new)
        a = pool[base]
        b = pool[neighbors[base, pick]]
        x = a + lam[:, None] * (b - a)
        # interpolation cannot leave the segment; clamp away last-ulp excess
        x = np.clip(x, np.minimum(a, b), np.maximum(a, b))
        new_X.append(x)
        new_y.append(np.full(n_new, c, dtype=np.int64))

    if not new_X:
        return train
    X = np.vstack([train.X] + new_X)
    y = np.concatenate([train.y] + new_y)
    synthetic = np.concatenate([train.synthetic,
                                np.ones(X.shape[0] - train.n_rows, dtype=bool)])
    stay_ids = None if train.stay_ids is None else np.concatenate(
        [train.stay_ids, np.full(X.shape[0] - train.n_rows, -1, dtype=np.int64)])
    return Dataset(X=X, y=y, columns=train.columns, synthetic=synthetic,
                   stay_ids=stay_ids, codec=train.codec)


@dataclasses.dataclass
class RfeResult:
    selected: list[str]
    selected_indices: np.ndarray
    trace: pd.DataFrame  # step, n_features, macro_f1

    def trace_csv(self, path) -> None:
        self.trace.to_csv(path, index=False, lineterminator="\n")


def _importance_signal(model, n_features: int) -> np.ndarray:
    if hasattr(model, "feature_importances"):
        return np.asarray(model.feature_importances(), dtype=np.float64)
    if hasattr(model, "coef_") and getattr(model, "coef_") is not None:
        return np.abs(np.asarray(model.coef_)).sum(axis=0)[:n_features]
    raise UnsupportedModelError(
        f"{type(model).__name__} exposes no feature importance signal; "
        "recursive elimination needs tree gain or linear coefficients")


def rfe_select(train: Dataset, model_factory, step_k: int = 10,
               target_range: tuple[int, int] = (1, 10 ** 9), cv_folds: int = 5,
               seed: int = 0) -> RfeResult:
    """Recursive feature elimination tracked by cross-validated macro-F1.

    Repeatedly scores the active feature set, fits the model, and removes
    the ``step_k`` lowest-importance features while at least ``min`` remain.
    Returns the best-scoring set with size inside ``target_range``; ties
    prefer the smaller set.
    """
    lo, hi = target_range
    if step_k < 1:
        raise ValidationError(f"step_k must be >= 1, got {step_k}")
    if not 1 <= lo <= hi:
        raise ValidationError(f"target_range must satisfy 1 <= min <= max, got {target_range}")
    hi = min(hi, train.n_features)
    if lo > train.n_features:
        raise ValidationError(
            f"target_range min {lo} exceeds feature count {train.n_features}")
    if step_k >= train.n_features:
        raise ValidationError(
            f"step_k {step_k} would eliminate all {train.n_features} features")

    active = np.arange(train.n_features)
    rows = []
    candidates = []
    step = 0
    while True:
        subset = train.select_columns(active)
        result = cross_validate(subset, model_factory, k_folds=cv_folds, seed=seed)
        score = result.mean("macro_f1")
        rows.append({"step": step, "n_features": active.size, "macro_f1": score})
        if lo <= active.size <= hi:
            candidates.append((active.size, score, active.copy()))
        if active.size - step_k < lo:
            break
        model = model_factory()
        model.fit(subset.X, subset.y)
        importance = _importance_signal(model, active.size)
        order = np.argsort(importance, kind="stable")
        active = np.sort(active[order[step_k:]])
        step += 1

    if not candidates:
        raise ValidationError(
            f"elimination by {step_k} never lands inside target_range {target_range}")
    best_size, _, best_set = max(candidates, key=lambda t: (t[1], -t[0]))
    trace = pd.DataFrame(rows, columns=["step", "n_features", "macro_f1"])
    return RfeResult(selected=[train.columns[i] for i in best_set],
                     selected_indices=best_set, trace=trace)


def importance_groups(columns) -> dict[str, list[int]]:
    """Group design-matrix columns by their source feature.

    One-hot levels (``col=level``) collapse onto ``col`` and per-test
    aggregates (``test::stat``) onto ``test``, matching how importances are
    reported per original feature.
    """
    groups: dict[str, list[int]] = {}
    for i, name in enumerate(columns):
        if "::" in name:
            key = name.split("::")[0]
        elif "=" in name:
            key = name.split("=")[0]
        else:
            key = name
        groups.setdefault(key, []).append(i)
    return groups
