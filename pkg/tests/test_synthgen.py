"""Cohort generator checks: determinism, planted signal, referential shape."""
import hashlib
from pathlib import Path

import numpy as np
import pytest

from neurolos.errors import ValidationError
from neurolos.synthgen import (CohortSpec, ICD_FAMILIES, MAX_LOS_DAYS,
                               MIN_LOS_DAYS, TEST_CATALOG, VENT_MODES,
                               emit_tables, generate_cohort, read_ground_truth,
                               severity_to_class_probs, signal_to_rho)


def _dir_digest(path: Path) -> str:
    h = hashlib.sha256()
    for f in sorted(Path(path).iterdir()):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()


def _classes_from_los(los: np.ndarray) -> np.ndarray:
    return np.where(los < 2.0, 0, np.where(los < 7.0, 1, 2))


@pytest.fixture(scope="module")
def cohort_2000():
    return generate_cohort(CohortSpec(n_patients=2000, seed=42, signal_strength=0.8))


class TestSpecValidation:
    def test_rejects_empty_cohort(self):
        with pytest.raises(ValidationError, match="n_patients"):
            generate_cohort(CohortSpec(n_patients=0))

    @pytest.mark.parametrize("field,value", [
        ("signal_strength", 1.5),
        ("missingness_rate", -0.1),
        ("events_per_stay_mean", 0.0),
        ("icd_mix", (0.5, 0.5, 0.5)),
        ("los_shape", (1.0, 0.0)),
    ])
    def test_error_names_offending_field(self, field, value):
        spec = CohortSpec(n_patients=5)
        setattr(spec, field, value)
        with pytest.raises(ValidationError, match=field):
            spec.validate()


class TestDeterminism:
    def test_same_spec_same_bytes(self, tmp_path):
        for sub in ("a", "b"):
            raw, gt = generate_cohort(CohortSpec(n_patients=10, seed=7))
            emit_tables(raw, tmp_path / sub, gt)
        assert _dir_digest(tmp_path / "a") == _dir_digest(tmp_path / "b")

    def test_thread_count_cannot_change_output(self, tmp_path):
        raw1, gt1 = generate_cohort(CohortSpec(n_patients=30, seed=5), threads=1)
        raw4, gt4 = generate_cohort(CohortSpec(n_patients=30, seed=5), threads=4)
        emit_tables(raw1, tmp_path / "t1", gt1)
        emit_tables(raw4, tmp_path / "t4", gt4)
        assert _dir_digest(tmp_path / "t1") == _dir_digest(tmp_path / "t4")

    def test_different_seed_different_cohort(self):
        a, _ = generate_cohort(CohortSpec(n_patients=10, seed=1))
        b, _ = generate_cohort(CohortSpec(n_patients=10, seed=2))
        assert not a.icustays["los"].equals(b.icustays["los"])


class TestEmittedFiles:
    def test_seven_files_emitted(self, tmp_path):
        raw, gt = generate_cohort(CohortSpec(n_patients=5, seed=1))
        paths = emit_tables(raw, tmp_path, gt)
        names = sorted(p.name for p in paths)
        assert names == ["admissions.csv", "chartevents.csv", "d_items.csv",
                         "diagnoses_icd.csv", "ground_truth.csv",
                         "icustays.csv", "patients.csv"]

    def test_ground_truth_round_trip(self, tmp_path):
        raw, gt = generate_cohort(CohortSpec(n_patients=8, seed=3))
        emit_tables(raw, tmp_path, gt)
        back = read_ground_truth(tmp_path / "ground_truth.csv")
        np.testing.assert_array_equal(back.frame.to_numpy(), gt.frame.to_numpy())


class TestCohortShape:
    def test_stay_timing_consistent(self, cohort_2000):
        raw, _ = cohort_2000
        stays = raw.icustays
        assert (stays["intime"] < stays["outtime"]).all()
        seconds = (stays["outtime"] - stays["intime"]).dt.total_seconds()
        np.testing.assert_allclose(stays["los"], seconds / 86400.0, rtol=0, atol=0)
        assert stays["los"].between(MIN_LOS_DAYS, MAX_LOS_DAYS).all()

    def test_every_admission_has_matching_primary_diagnosis(self, cohort_2000):
        raw, _ = cohort_2000
        primary = raw.diagnoses_icd[raw.diagnoses_icd["seq_num"] == 1]
        assert set(primary["hadm_id"]) == set(raw.admissions["hadm_id"])
        assert primary["icd_code"].str.startswith(ICD_FAMILIES).all()

    def test_events_reference_known_items_and_fit_in_stay(self, cohort_2000):
        raw, _ = cohort_2000
        assert set(raw.chartevents["itemid"]) <= set(raw.d_items["itemid"])
        joined = raw.chartevents.merge(raw.icustays, on="stay_id")
        assert (joined["charttime"] >= joined["intime"]).all()
        assert (joined["charttime"] < joined["outtime"]).all()

    def test_categorical_test_values_are_mode_names(self, cohort_2000):
        raw, _ = cohort_2000
        vent_item = next(t["itemid"] for t in TEST_CATALOG
                         if t["abbreviation"] == "Ventilator Mode")
        values = set(raw.chartevents.loc[raw.chartevents["itemid"] == vent_item, "value"])
        assert values <= set(VENT_MODES)
        assert len(values) > 5

    def test_missingness_thins_events(self):
        dense, _ = generate_cohort(CohortSpec(n_patients=40, seed=9, missingness_rate=0.0))
        sparse, _ = generate_cohort(CohortSpec(n_patients=40, seed=9, missingness_rate=0.5))
        ratio = len(sparse.chartevents) / len(dense.chartevents)
        assert 0.4 < ratio < 0.6


class TestPlantedSignal:
    def test_bayes_accuracy_in_band(self, cohort_2000):
        raw, gt = cohort_2000
        los = raw.icustays.merge(gt.frame, on="hadm_id")["los"].to_numpy()
        accuracy = (_classes_from_los(los) == gt.bayes_classes()).mean()
        assert 0.75 <= accuracy <= 0.85

    def test_severity_monotone_across_classes(self, cohort_2000):
        raw, gt = cohort_2000
        merged = raw.icustays.merge(gt.frame, on="hadm_id")
        classes = _classes_from_los(merged["los"].to_numpy())
        severity = merged["severity"].to_numpy()
        means = [severity[classes == c].mean() for c in range(3)]
        assert means[0] < means[1] < means[2]

    def test_zero_signal_distribution_is_prior(self):
        _, gt = generate_cohort(CohortSpec(n_patients=300, seed=4, signal_strength=0.0))
        np.testing.assert_allclose(gt.probabilities(), 1.0 / 3.0, atol=1e-12)

    def test_zero_signal_mutual_information_near_zero(self):
        raw, gt = generate_cohort(CohortSpec(n_patients=2000, seed=6, signal_strength=0.0))
        merged = raw.icustays.merge(gt.frame, on="hadm_id")
        classes = _classes_from_los(merged["los"].to_numpy())
        severity = merged["severity"].to_numpy()
        bins = np.digitize(severity, np.quantile(severity, np.linspace(0.1, 0.9, 9)))
        joint = np.zeros((10, 3))
        for b, c in zip(bins, classes):
            joint[b, c] += 1
        joint /= joint.sum()
        pb = joint.sum(axis=1, keepdims=True)
        pc = joint.sum(axis=0, keepdims=True)
        nz = joint > 0
        mi = float(np.sum(joint[nz] * np.log2(joint[nz] / (pb @ pc)[nz])))
        assert mi < 0.03

    def test_probabilities_sum_to_one(self, cohort_2000):
        _, gt = cohort_2000
        np.testing.assert_allclose(gt.probabilities().sum(axis=1), 1.0, atol=1e-9)

    def test_rho_mapping_monotone_and_bounded(self):
        grid = np.linspace(0.0, 1.0, 21)
        rho = np.array([signal_to_rho(g) for g in grid])
        assert rho[0] == 0.0
        assert np.all(np.diff(rho) > 0)
        assert rho[-1] < 1.0

    def test_class_probs_respond_to_severity(self):
        probs = severity_to_class_probs(np.array([-2.0, 0.0, 2.0]), 0.9, 1.32, 1.45)
        assert probs[0, 0] > probs[0, 2]
        assert probs[2, 2] > probs[2, 0]
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
