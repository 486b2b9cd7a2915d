"""Multiclass metrics, cross-validation and permutation importance.

Per-class precision, recall and F1 are aggregated three ways: macro
(unweighted mean), weighted (mean weighted by true class shares) and micro
(recomputed from pooled counts).  For single-label prediction micro
precision, micro recall and accuracy coincide; reports carry all three
aggregations so no convention is guessed at.

Zero denominators (a class never predicted, or absent from the truth) are
scored 0 and flagged instead of propagating NaN into the averages.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import ValidationError

N_CLASSES = 3
CLASS_NAMES = ("short", "medium", "long")


@dataclasses.dataclass
class ConfusionMatrix:
    """Counts[i, j] = rows with true class i predicted as class j."""

    counts: np.ndarray

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        np.add.at(counts, (np.asarray(y_true, dtype=np.int64),
                           np.asarray(y_pred, dtype=np.int64)), 1)
        return cls(counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self) -> np.ndarray:
        return np.diag(self.counts)

    def fp(self) -> np.ndarray:
        return self.counts.sum(axis=0) - self.tp()

    def fn(self) -> np.ndarray:
        return self.counts.sum(axis=1) - self.tp()


@dataclasses.dataclass
class MetricsReport:
    confusion: ConfusionMatrix
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    zero_division_notes: list[str]

    def value(self, metric: str) -> float:
        known = {"accuracy", "macro_precision", "macro_recall", "macro_f1",
                 "weighted_precision", "weighted_recall", "weighted_f1",
                 "micro_precision", "micro_recall", "micro_f1"}
        if metric not in known:
            raise ValidationError(f"unknown metric {metric!r}; choose from {sorted(known)}")
        return float(getattr(self, metric))

    def summary(self, average: str = "macro") -> dict:
        if average not in ("macro", "weighted", "micro"):
            raise ValidationError(f"average must be macro/weighted/micro, got {average!r}")
        return {
            "accuracy": self.accuracy,
            "precision": getattr(self, f"{average}_precision"),
            "recall": getattr(self, f"{average}_recall"),
            "f1": getattr(self, f"{average}_f1"),
        }


def _safe_divide(num, den, what, notes):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    good = den > 0
    out[good] = num[good] / den[good]
    for i in np.flatnonzero(~good):
        notes.append(f"{what} undefined for class {CLASS_NAMES[i]} (0/0), reported 0")
    return out


def compute_metrics(y_true, y_pred) -> MetricsReport:
    """Score one prediction vector against the truth."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValidationError(
            f"y_true and y_pred must be equal-length vectors, got {y_true.shape} and {y_pred.shape}")
    if y_true.size == 0:
        raise ValidationError("cannot score empty predictions")
    for name, arr in (("y_true", y_true), ("y_pred", y_pred)):
        if not np.isin(arr, np.arange(N_CLASSES)).all():
            raise ValidationError(f"{name} labels must be in {{0,1,2}}")

    confusion = ConfusionMatrix.from_predictions(y_true, y_pred)
    tp, fp, fn = confusion.tp(), confusion.fp(), confusion.fn()
    notes: list[str] = []

    precision = _safe_divide(tp, tp + fp, "precision", notes)
    recall = _safe_divide(tp, tp + fn, "recall", notes)
    f1 = _safe_divide(2.0 * precision * recall, precision + recall, "f1", notes)

    accuracy = float(tp.sum() / confusion.total)
    weights = confusion.counts.sum(axis=1) / confusion.total

    micro_precision = float(tp.sum() / (tp.sum() + fp.sum()))
    micro_recall = float(tp.sum() / (tp.sum() + fn.sum()))
    micro_f1 = 2.0 * micro_precision * micro_recall / (micro_precision + micro_recall) \
        if micro_precision + micro_recall > 0 else 0.0

    return MetricsReport(
        confusion=confusion,
        accuracy=accuracy,
        precision=precision, recall=recall, f1=f1,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=float(np.sum(weights * precision)),
        weighted_recall=float(np.sum(weights * recall)),
        weighted_f1=float(np.sum(weights * f1)),
        micro_precision=micro_precision,
        micro_recall=micro_recall,
        micro_f1=float(micro_f1),
        zero_division_notes=notes,
    )


def reports_table(named_reports: dict, average: str = "macro"):
    """Rows (Model, Accuracy, Precision, Recall, F1 Score) for several models."""
    import pandas as pd

    rows = []
    for model, report in named_reports.items():
        summary = report.summary(average)
        rows.append({"Model": model, "Accuracy": summary["accuracy"],
                     "Precision": summary["precision"], "Recall": summary["recall"],
                     "F1 Score": summary["f1"]})
    return pd.DataFrame(rows, columns=["Model", "Accuracy", "Precision", "Recall",
                                       "F1 Score"])


def table_to_markdown(table) -> str:
    """Minimal pipe-table rendering (floats to 4 places)."""
    def fmt(value):
        return f"{value:.4f}" if isinstance(value, float) else str(value)

    header = "| " + " | ".join(table.columns) + " |"
    rule = "|" + "|".join("---" for _ in table.columns) + "|"
    lines = [header, rule]
    for _, row in table.iterrows():
        lines.append("| " + " | ".join(fmt(v) for v in row) + " |")
    return "\n".join(lines) + "\n"


def stratified_fold_assignments(labels, k_folds: int, seed: int) -> np.ndarray:
    """Per-row fold ids in [0, k_folds): shuffled round-robin within class."""
    labels = np.asarray(labels, dtype=np.int64)
    if k_folds < 2:
        raise ValidationError(f"k_folds must be >= 2, got {k_folds}")
    counts = np.bincount(labels, minlength=N_CLASSES)
    present = counts[counts > 0]
    if k_folds > present.min():
        small = CLASS_NAMES[int(np.argmin(np.where(counts > 0, counts, counts.max() + 1)))]
        raise ValidationError(
            f"k_folds {k_folds} exceeds the {small} class count {present.min()}")
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.shape[0], dtype=np.int64)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        folds[idx] = np.arange(idx.size) % k_folds
    return folds


@dataclasses.dataclass
class CrossValidationResult:
    reports: list[MetricsReport]
    folds: np.ndarray

    def mean(self, metric: str) -> float:
        return float(np.mean([r.value(metric) for r in self.reports]))

    def std(self, metric: str) -> float:
        return float(np.std([r.value(metric) for r in self.reports]))


def cross_validate(dataset, model_factory, k_folds: int = 5, seed: int = 0,
                   smote_k: int | None = None) -> CrossValidationResult:
    """Stratified k-fold scoring of a model built fresh per fold.

    ``dataset`` is a feature dataset (matrix + labels); when ``smote_k`` is
    set, minority oversampling runs inside each training fold only, so no
    synthetic row ever leaks into a validation fold.
    """
    folds = stratified_fold_assignments(dataset.y, k_folds, seed)
    reports = []
    for fold in range(k_folds):
        train = dataset.take(np.flatnonzero(folds != fold))
        val = dataset.take(np.flatnonzero(folds == fold))
        if smote_k is not None:
            from .features import smote_oversample
            train = smote_oversample(train, k_neighbors=smote_k,
                                     seed=seed * 1000 + fold)
        model = model_factory()
        model.fit(train.X, train.y)
        reports.append(compute_metrics(val.y, model.predict(val.X)))
    return CrossValidationResult(reports=reports, folds=folds)


@dataclasses.dataclass
class ImportanceResult:
    names: list[str]
    baseline: float
    mean_drop: np.ndarray
    std_drop: np.ndarray

    def ranking(self) -> list[tuple[str, float, float]]:
        order = np.argsort(-self.mean_drop, kind="stable")
        return [(self.names[i], float(self.mean_drop[i]), float(self.std_drop[i]))
                for i in order]


def permutation_importance(model, X, y, names=None, metric: str = "macro_f1",
                           n_repeats: int = 5, seed: int = 0,
                           groups: dict[str, list[int]] | None = None) -> ImportanceResult:
    """Metric drop when one feature (or named group) is shuffled.

    ``X`` may be 2-d (rows x features) or 3-d (rows x time x channels); in
    the 3-d case the shuffle reorders whole per-sample series of a channel,
    using one row permutation for every time index.  ``groups`` shuffles
    several columns/channels together under a single permutation, e.g. the
    value/flag/mask triple that one test contributes.
    """
    if n_repeats < 1:
        raise ValidationError(f"n_repeats must be >= 1, got {n_repeats}")
    X = np.asarray(X)
    y = np.asarray(y)
    axis = X.ndim - 1
    n_features = X.shape[axis]
    if groups is None:
        base_names = names if names is not None else \
            [f"feature_{i}" for i in range(n_features)]
        groups = {name: [i] for i, name in enumerate(base_names)}
    baseline = compute_metrics(y, model.predict(X)).value(metric)

    rng = np.random.default_rng(seed)
    group_names = list(groups)
    mean_drop = np.zeros(len(group_names))
    std_drop = np.zeros(len(group_names))
    for g, name in enumerate(group_names):
        cols = groups[name]
        drops = np.zeros(n_repeats)
        for r in range(n_repeats):
            perm = rng.permutation(X.shape[0])
            shuffled = X.copy()
            if X.ndim == 2:
                shuffled[:, cols] = X[perm][:, cols]
            else:
                shuffled[:, :, cols] = X[perm][:, :, cols]
            score = compute_metrics(y, model.predict(shuffled)).value(metric)
            drops[r] = baseline - score
        mean_drop[g] = drops.mean()
        std_drop[g] = drops.std()
    return ImportanceResult(names=group_names, baseline=baseline,
                            mean_drop=mean_drop, std_drop=std_drop)
