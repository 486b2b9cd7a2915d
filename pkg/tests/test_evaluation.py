"""Metric, cross-validation and permutation-importance checks."""
import numpy as np
import pytest

from neurolos.errors import ValidationError
from neurolos.evaluation import (ConfusionMatrix, compute_metrics,
                                 cross_validate, permutation_importance,
                                 reports_table, stratified_fold_assignments,
                                 table_to_markdown)
from neurolos.features import Dataset


def make_dataset(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    return Dataset(X=X, y=y, columns=[f"f{i}" for i in range(X.shape[1])],
                   synthetic=np.zeros(len(y), dtype=bool))


class MajorityModel:
    """Predicts the most frequent training class."""

    def fit(self, X, y):
        self.mode = np.bincount(y).argmax()
        return self

    def predict(self, X):
        return np.full(X.shape[0], self.mode, dtype=np.int64)


class ThresholdModel:
    """Reads only column 0: class 1 when positive, else 0."""

    def fit(self, X, y):
        return self

    def predict(self, X):
        first = X[..., 0] if X.ndim == 2 else X[:, 0, 0]
        return (first > 0).astype(np.int64)


class TestConfusionMatrix:
    def test_counts_and_margins(self):
        y_true = [0, 0, 1, 1, 2, 2]
        y_pred = [0, 1, 1, 2, 2, 0]
        cm = ConfusionMatrix.from_predictions(y_true, y_pred)
        assert cm.total == 6
        np.testing.assert_array_equal(cm.tp(), [1, 1, 1])
        np.testing.assert_array_equal(cm.fp(), [1, 1, 1])
        np.testing.assert_array_equal(cm.fn(), [1, 1, 1])


class TestComputeMetrics:
    def test_perfect_prediction_scores_one(self):
        y = np.array([0, 1, 2, 1, 0, 2])
        report = compute_metrics(y, y)
        for metric in ("accuracy", "macro_f1", "weighted_f1", "micro_f1",
                       "macro_precision", "macro_recall"):
            assert report.value(metric) == 1.0
        assert report.zero_division_notes == []

    def test_hand_tallied_example(self):
        report = compute_metrics([0, 0, 1, 1, 2, 2], [0, 1, 1, 2, 2, 0])
        assert report.accuracy == 0.5
        np.testing.assert_allclose(report.precision, [0.5, 0.5, 0.5])
        np.testing.assert_allclose(report.recall, [0.5, 0.5, 0.5])
        np.testing.assert_allclose(report.macro_f1, 0.5)

    def test_micro_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            y_true = rng.integers(0, 3, 60)
            y_pred = rng.integers(0, 3, 60)
            report = compute_metrics(y_true, y_pred)
            assert report.micro_precision == report.micro_recall == report.accuracy
            np.testing.assert_allclose(report.micro_f1, report.accuracy)

    def test_macro_f1_invariant_under_relabeling(self):
        rng = np.random.default_rng(6)
        y_true = rng.integers(0, 3, 90)
        y_pred = rng.integers(0, 3, 90)
        base = compute_metrics(y_true, y_pred).macro_f1
        for perm in ([1, 2, 0], [2, 0, 1], [1, 0, 2]):
            relabel = np.array(perm)
            swapped = compute_metrics(relabel[y_true], relabel[y_pred]).macro_f1
            np.testing.assert_allclose(swapped, base, atol=1e-12)

    def test_weighted_equals_macro_when_balanced(self):
        rng = np.random.default_rng(7)
        y_true = np.repeat([0, 1, 2], 30)
        y_pred = rng.integers(0, 3, 90)
        report = compute_metrics(y_true, y_pred)
        np.testing.assert_allclose(report.weighted_f1, report.macro_f1, atol=1e-12)
        np.testing.assert_allclose(report.weighted_precision, report.macro_precision,
                                   atol=1e-12)

    def test_zero_division_flagged_not_nan(self):
        # class 2 never predicted, class 1 never true
        report = compute_metrics([0, 0, 2, 2], [0, 1, 0, 1])
        assert report.precision[2] == 0.0
        assert any("precision" in note and "long" in note
                   for note in report.zero_division_notes)
        assert np.isfinite(report.macro_f1)

    def test_input_validation(self):
        with pytest.raises(ValidationError):
            compute_metrics([0, 1], [0])
        with pytest.raises(ValidationError):
            compute_metrics([], [])
        with pytest.raises(ValidationError):
            compute_metrics([0, 3], [0, 1])
        with pytest.raises(ValidationError):
            compute_metrics([0, 1], [0, 1]).value("f2")

    def test_report_table_layout(self):
        report = compute_metrics([0, 1, 2], [0, 1, 2])
        table = reports_table({"knn": report, "svm": report}, average="weighted")
        assert list(table.columns) == ["Model", "Accuracy", "Precision", "Recall",
                                       "F1 Score"]
        text = table_to_markdown(table)
        assert text.startswith("| Model | Accuracy |")
        assert "| knn | 1.0000 |" in text


class TestFolds:
    def test_balanced_folds_partition_exactly(self):
        y = np.repeat([0, 1, 2], 100)
        folds = stratified_fold_assignments(y, k_folds=5, seed=3)
        for fold in range(5):
            members = y[folds == fold]
            assert members.size == 60
            np.testing.assert_array_equal(np.bincount(members), [20, 20, 20])

    def test_partition_covers_all_rows(self):
        rng = np.random.default_rng(1)
        y = rng.integers(0, 3, 103)
        folds = stratified_fold_assignments(y, k_folds=4, seed=0)
        assert folds.min() == 0 and folds.max() == 3
        assert folds.shape == y.shape

    def test_fold_larger_than_class_errors(self):
        y = np.array([0] * 50 + [1] * 50 + [2] * 3)
        with pytest.raises(ValidationError, match="long"):
            stratified_fold_assignments(y, k_folds=5, seed=0)

    def test_deterministic(self):
        y = np.random.default_rng(2).integers(0, 3, 80)
        a = stratified_fold_assignments(y, 4, seed=9)
        b = stratified_fold_assignments(y, 4, seed=9)
        np.testing.assert_array_equal(a, b)


class TestCrossValidate:
    def test_constant_model_scores_majority_share(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(120, 4))
        y = np.repeat([0, 1, 2], [60, 40, 20])
        ds = make_dataset(X, y)
        result = cross_validate(ds, MajorityModel, k_folds=4, seed=2)
        np.testing.assert_allclose(result.mean("accuracy"), 0.5, atol=0.01)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(12)
        ds = make_dataset(rng.normal(size=(90, 3)), rng.integers(0, 3, 90))
        a = cross_validate(ds, MajorityModel, k_folds=3, seed=5)
        b = cross_validate(ds, MajorityModel, k_folds=3, seed=5)
        assert [r.accuracy for r in a.reports] == [r.accuracy for r in b.reports]

    def test_smote_stays_out_of_validation_folds(self):
        rng = np.random.default_rng(13)
        y = np.repeat([0, 1, 2], [50, 30, 20])
        ds = make_dataset(rng.normal(size=(100, 3)), y)

        seen_val_sizes = []

        class SpyModel(MajorityModel):
            def fit(self, X, y):
                # training fold is balanced by SMOTE to 3x the majority count
                assert np.bincount(y).min() == np.bincount(y).max()
                return super().fit(X, y)

            def predict(self, X):
                seen_val_sizes.append(X.shape[0])
                return super().predict(X)

        cross_validate(ds, SpyModel, k_folds=5, seed=1, smote_k=3)
        assert sum(seen_val_sizes) == 100  # validation rows: real only


class TestPermutationImportance:
    def test_unused_feature_has_zero_drop(self):
        rng = np.random.default_rng(20)
        X = rng.normal(size=(200, 3))
        y = (X[:, 0] > 0).astype(np.int64)
        model = ThresholdModel().fit(X, y)
        result = permutation_importance(model, X, y, names=["a", "b", "c"],
                                        metric="accuracy", n_repeats=4, seed=0)
        np.testing.assert_allclose(result.mean_drop[1:], 0.0, atol=1e-12)
        np.testing.assert_allclose(result.std_drop[1:], 0.0, atol=1e-12)

    def test_informative_feature_has_largest_drop(self):
        rng = np.random.default_rng(21)
        X = rng.normal(size=(300, 4))
        y = (X[:, 0] > 0).astype(np.int64)
        model = ThresholdModel().fit(X, y)
        result = permutation_importance(model, X, y, metric="accuracy",
                                        n_repeats=5, seed=1)
        assert np.argmax(result.mean_drop) == 0
        assert result.mean_drop[0] > 0.2

    def test_duplicated_feature_never_beats_original(self):
        rng = np.random.default_rng(22)
        base = rng.normal(size=(250, 1))
        X = np.hstack([base, base.copy(), rng.normal(size=(250, 1))])
        y = (base[:, 0] > 0).astype(np.int64)
        model = ThresholdModel().fit(X, y)  # reads only column 0
        result = permutation_importance(model, X, y, metric="accuracy",
                                        n_repeats=6, seed=3)
        assert result.mean_drop[1] <= result.mean_drop[0]
        np.testing.assert_allclose(result.mean_drop[1], 0.0, atol=1e-12)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(23)
        X = rng.normal(size=(100, 3))
        y = (X[:, 0] > 0).astype(np.int64)
        model = ThresholdModel().fit(X, y)
        a = permutation_importance(model, X, y, n_repeats=3, seed=7)
        b = permutation_importance(model, X, y, n_repeats=3, seed=7)
        np.testing.assert_array_equal(a.mean_drop, b.mean_drop)

    def test_group_shuffle_moves_together(self):
        rng = np.random.default_rng(24)
        X = rng.normal(size=(200, 2))
        y = (X[:, 0] > 0).astype(np.int64)
        model = ThresholdModel().fit(X, y)
        grouped = permutation_importance(model, X, y, metric="accuracy",
                                         groups={"pair": [0, 1]}, n_repeats=4, seed=2)
        assert grouped.names == ["pair"]
        assert grouped.mean_drop[0] > 0.2

    def test_sequence_channel_shuffle_is_sample_level(self):
        rng = np.random.default_rng(25)
        X = rng.normal(size=(150, 8, 2))  # rows x time x channels
        y = (X[:, 0, 0] > 0).astype(np.int64)
        model = ThresholdModel().fit(X, y)
        result = permutation_importance(model, X, y, metric="accuracy",
                                        names=["c0", "c1"], n_repeats=4, seed=5)
        assert result.mean_drop[0] > 0.2
        np.testing.assert_allclose(result.mean_drop[1], 0.0, atol=1e-12)

    def test_unknown_metric_rejected(self):
        X = np.zeros((4, 2))
        y = np.array([0, 1, 0, 1])
        model = ThresholdModel().fit(X, y)
        with pytest.raises(ValidationError, match="unknown metric"):
            permutation_importance(model, X, y, metric="auc")

    def test_ranking_sorted_by_drop(self):
        rng = np.random.default_rng(26)
        X = rng.normal(size=(200, 3))
        y = (X[:, 0] > 0).astype(np.int64)
        model = ThresholdModel().fit(X, y)
        ranking = permutation_importance(model, X, y, n_repeats=3, seed=0).ranking()
        assert ranking[0][0] == "feature_0"
        drops = [r[1] for r in ranking]
        assert drops == sorted(drops, reverse=True)
