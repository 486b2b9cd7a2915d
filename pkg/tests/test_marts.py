"""Mart builder checks: binning, filtering, aggregation, persistence."""
import numpy as np
import pandas as pd
import pytest

from neurolos import marts
from neurolos.errors import SchemaError, ValidationError
from neurolos.marts import (LosClass, bin_los, build_admissions_mart,
                            build_chartevents_by_minute,
                            build_chartevents_original, export_ddl,
                            filter_neuro_admissions, load_mart, los_to_classes,
                            save_mart)
from neurolos.synthgen import CohortSpec, generate_cohort
from neurolos.tables import RawTables


def _ts(text):
    return pd.Timestamp(text).as_unit("s")


def handcrafted_cohort() -> RawTables:
    """Three stays over two admissions; one admission has two stays.

    stay 1000: 2 hours, one HR and one out-of-range PH at the same time
    stay 1001: 3 days, zero chartevents (forces imputation)
    stay 2000: exactly 120 minutes, two HR in one minute, one ventilator
               mode reading, one unknown itemid and one pre-stay event
    """
    patients = pd.DataFrame({
        "subject_id": np.array([1, 2], dtype=np.int64),
        "gender": ["F", "M"],
        "anchor_age": np.array([70, 55], dtype=np.int64),
        "anchor_year": np.array([2120, 2121], dtype=np.int64),
        "anchor_year_group": ["2119 - 2121", "2119 - 2121"],
        "dod": pd.Series([pd.NaT, pd.NaT], dtype="datetime64[s]"),
    })
    admissions = pd.DataFrame({
        "subject_id": np.array([1, 2], dtype=np.int64),
        "hadm_id": np.array([100, 200], dtype=np.int64),
        "admittime": pd.Series([_ts("2120-01-01T05:30:00"),
                                _ts("2121-03-05T14:00:00")]),
        "dischtime": pd.Series([_ts("2120-01-06T12:00:00"),
                                _ts("2121-03-07T10:00:00")]),
        "deathtime": pd.Series([pd.NaT, pd.NaT], dtype="datetime64[s]"),
        "insurance": ["Medicare", "Private"],
        "language": ["English", "English"],
        "marital_status": ["MARRIED", "SINGLE"],
        "race": ["WHITE", "ASIAN"],
    })
    stays = [
        (1000, 100, _ts("2120-01-01T06:00:00"), _ts("2120-01-01T08:00:00")),
        (1001, 100, _ts("2120-01-02T00:00:00"), _ts("2120-01-05T00:00:00")),
        (2000, 200, _ts("2121-03-05T15:00:00"), _ts("2121-03-05T17:00:00")),
    ]
    icustays = pd.DataFrame({
        "stay_id": np.array([s[0] for s in stays], dtype=np.int64),
        "hadm_id": np.array([s[1] for s in stays], dtype=np.int64),
        "first_careunit": ["Neuro Intensive Care Unit"] * 3,
        "last_careunit": ["Neuro Intensive Care Unit"] * 3,
        "intime": pd.Series([s[2] for s in stays]),
        "outtime": pd.Series([s[3] for s in stays]),
        "los": np.array([(s[3] - s[2]).total_seconds() / 86400.0 for s in stays]),
    })
    diagnoses = pd.DataFrame({
        "hadm_id": np.array([100, 100, 200], dtype=np.int64),
        "seq_num": np.array([1, 2, 1], dtype=np.int64),
        "icd_code": ["I619", "I10", "G410"],
        "icd_version": np.array([10, 10, 10], dtype=np.int64),
    })
    events = [
        (1000, 100, "2120-01-01T06:30:00", 220045, "80", "bpm"),
        (1000, 100, "2120-01-01T06:30:00", 223830, "7.2", np.nan),
        (2000, 200, "2121-03-05T15:05:10", 220045, "90", "bpm"),
        (2000, 200, "2121-03-05T15:05:40", 220045, "95", "bpm"),
        (2000, 200, "2121-03-05T16:00:00", 223849, "SIMV", np.nan),
        (2000, 200, "2121-03-05T15:10:00", 999, "1", np.nan),
        (2000, 200, "2121-03-05T14:59:59", 220045, "70", "bpm"),
    ]
    chartevents = pd.DataFrame({
        "stay_id": np.array([e[0] for e in events], dtype=np.int64),
        "hadm_id": np.array([e[1] for e in events], dtype=np.int64),
        "charttime": pd.Series([_ts(e[2]) for e in events]),
        "itemid": np.array([e[3] for e in events], dtype=np.int64),
        "value": [e[4] for e in events],
        "valueuom": [e[5] for e in events],
    })
    d_items = pd.DataFrame({
        "itemid": np.array([220045, 223830, 223849], dtype=np.int64),
        "label": ["Heart Rate", "PH (Arterial)", "Ventilator Mode"],
        "abbreviation": ["HR", "PH (Arterial)", "Ventilator Mode"],
        "lownormalvalue": np.array([60.0, 7.35, np.nan]),
        "highnormalvalue": np.array([100.0, 7.45, np.nan]),
        "category": ["Routine Vital Signs", "Labs", "Respiratory"],
        "unitname": ["bpm", np.nan, np.nan],
    })
    return RawTables(admissions=admissions, patients=patients, icustays=icustays,
                     diagnoses_icd=diagnoses, chartevents=chartevents,
                     d_items=d_items)


@pytest.fixture(scope="module")
def cohort():
    return handcrafted_cohort()


@pytest.fixture(scope="module")
def generated():
    raw, _ = generate_cohort(CohortSpec(n_patients=500, seed=17))
    return raw


@pytest.fixture(scope="module")
def static_mart(cohort):
    return build_admissions_mart(cohort, {100, 200})


@pytest.fixture(scope="module")
def event_mart(cohort):
    return build_chartevents_original(cohort, {100, 200})


@pytest.fixture(scope="module")
def minute_mart(cohort):
    return build_chartevents_by_minute(cohort, {100, 200})


class TestBinLos:
    def test_interior_points(self):
        assert bin_los(1.9) is LosClass.SHORT
        assert bin_los(3.0) is LosClass.MEDIUM
        assert bin_los(30.0) is LosClass.LONG

    def test_boundaries_are_half_open(self):
        assert bin_los(2.0) is LosClass.MEDIUM
        assert bin_los(7.0) is LosClass.LONG

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            bin_los(0.0)
        with pytest.raises(ValidationError):
            bin_los(-1.0)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(0)
        los = rng.uniform(0.01, 20.0, 200)
        codes = los_to_classes(los)
        assert all(codes[i] == int(bin_los(v)) for i, v in enumerate(los))

    def test_monotone(self):
        los = np.linspace(0.1, 15.0, 100)
        codes = los_to_classes(los)
        assert (np.diff(codes) >= 0).all()


class TestNeuroFilter:
    def test_primary_prefix_match(self):
        diag = pd.DataFrame({"hadm_id": [1], "seq_num": [1],
                             "icd_code": ["I619"], "icd_version": [10]})
        assert filter_neuro_admissions(diag) == {1}

    def test_secondary_diagnosis_ignored(self):
        diag = pd.DataFrame({"hadm_id": [1, 1], "seq_num": [1, 2],
                             "icd_code": ["E11", "I61"], "icd_version": [10, 10]})
        assert filter_neuro_admissions(diag) == set()

    def test_three_of_four_primaries(self):
        diag = pd.DataFrame({"hadm_id": [1, 2, 3, 4], "seq_num": [1] * 4,
                             "icd_code": ["I630", "G419", "I619", "I10"],
                             "icd_version": [10] * 4})
        assert filter_neuro_admissions(diag) == {1, 2, 3}


class TestStaticMart:
    def test_one_row_per_stay(self, static_mart):
        assert list(static_mart.frame["stay_id"]) == [1000, 1001, 2000]

    def test_multi_stay_admission_labeled_per_stay(self, static_mart):
        by_stay = static_mart.frame.set_index("stay_id")["label"]
        assert by_stay[1000] == LosClass.SHORT
        assert by_stay[1001] == LosClass.MEDIUM

    def test_daytime_buckets(self, static_mart):
        by_stay = static_mart.frame.set_index("stay_id")["admission_daytime"]
        assert by_stay[1000] == "night"   # admitted 05:30
        assert by_stay[2000] == "day"     # admitted 14:00

    def test_aggregates_and_imputation(self, static_mart):
        row = static_mart.frame.set_index("stay_id")
        np.testing.assert_allclose(row.loc[1000, "HR::value_mean_24h"], 80.0)
        # stay 2000 first 24h: HR 90 and 95 (pre-stay 70 dropped)
        np.testing.assert_allclose(row.loc[2000, "HR::value_mean_24h"], 92.5)
        # stay 1001 has no events: median of {80.0, 92.5}
        np.testing.assert_allclose(row.loc[1001, "HR::value_mean_24h"], 86.25)
        np.testing.assert_allclose(static_mart.meta["imputation_medians"]["HR::value_mean_24h"],
                                   86.25)

    def test_out_of_range_value_flagged(self, static_mart):
        row = static_mart.frame.set_index("stay_id")
        np.testing.assert_allclose(row.loc[1000, "PH (Arterial)::in_norm_share_24h"], 0.0)

    def test_unobserved_share_defaults_to_one(self, static_mart):
        row = static_mart.frame.set_index("stay_id")
        np.testing.assert_allclose(row.loc[1001, "HR::in_norm_share_24h"], 1.0)
        np.testing.assert_allclose(row.loc[1001, "PH (Arterial)::in_norm_share_24h"], 1.0)

    def test_categorical_test_keeps_modal_level(self, static_mart):
        row = static_mart.frame.set_index("stay_id")
        assert row.loc[2000, "Ventilator Mode::mode_24h"] == "SIMV"
        # unobserved stays imputed with the population mode
        assert row.loc[1000, "Ventilator Mode::mode_24h"] == "SIMV"

    def test_no_missing_values(self, static_mart):
        assert static_mart.frame.notna().all().all()

    def test_unknown_test_listed_in_error(self, cohort):
        with pytest.raises(ValidationError, match="Tidal Volume"):
            build_admissions_mart(cohort, {100}, test_list=["HR", "Tidal Volume"])

    def test_selection_must_exist(self, cohort):
        with pytest.raises(ValidationError, match="selected_hadm"):
            build_admissions_mart(cohort, {100, 555})

    def test_row_count_matches_filter(self, generated):
        selected = filter_neuro_admissions(generated.diagnoses_icd)
        mart = build_admissions_mart(generated, selected)
        want = generated.icustays["hadm_id"].isin(selected).sum()
        assert len(mart.frame) == want


class TestEventMart:
    def test_same_charttime_merges_to_one_row(self, event_mart):
        rows = event_mart.frame[event_mart.frame["stay_id"] == 1000]
        assert len(rows) == 1
        row = rows.iloc[0]
        assert row["HR::value"] == 80.0 and row["HR::mask"] == 1.0
        assert row["PH (Arterial)::value"] == 7.2 and row["PH (Arterial)::in_norm"] == 0.0

    def test_every_row_has_an_observation(self, event_mart):
        mask_cols = [c for c in event_mart.frame.columns if c.endswith("::mask")]
        assert (event_mart.frame[mask_cols].sum(axis=1) >= 1).all()

    def test_unknown_itemid_and_pre_stay_events_skipped(self, event_mart):
        assert event_mart.meta["skipped_events"]["unknown_itemid"] == 1
        assert event_mart.meta["skipped_events"]["outside_stay"] == 1

    def test_remaining_los_strictly_decreasing(self, event_mart):
        for _, group in event_mart.frame.groupby("stay_id"):
            assert (np.diff(group["remaining_los_days"]) < 0).all() or len(group) == 1
        assert (event_mart.frame["remaining_los_days"] > 0).all()

    def test_categorical_value_coded(self, event_mart):
        row = event_mart.frame[event_mart.frame["Ventilator Mode::mask"] == 1.0].iloc[0]
        from neurolos.synthgen import VENT_MODES
        assert VENT_MODES[int(row["Ventilator Mode::value"])] == "SIMV"


class TestMinuteMart:
    def test_one_row_per_minute(self, minute_mart):
        counts = minute_mart.frame.groupby("stay_id").size()
        assert counts[1000] == 120
        assert counts[2000] == 120
        assert counts[1001] == 3 * 24 * 60

    def test_last_observation_in_minute_wins(self, minute_mart):
        frame = minute_mart.frame[minute_mart.frame["stay_id"] == 2000].set_index("minute")
        assert frame.loc[5, "HR::value"] == 95.0
        assert frame.loc[5, "HR::mask"] == 1.0

    def test_unobserved_minutes_masked(self, minute_mart):
        frame = minute_mart.frame[minute_mart.frame["stay_id"] == 2000].set_index("minute")
        assert frame.loc[6, "HR::mask"] == 0.0
        assert np.isnan(frame.loc[6, "HR::value"])

    def test_remaining_at_intime_equals_los(self, minute_mart, cohort):
        first = minute_mart.frame.groupby("stay_id").first().reset_index() \
            .merge(cohort.icustays, on="stay_id")
        np.testing.assert_allclose(first["remaining_los_days"], first["los"])

    def test_event_timestamps_map_into_grid(self, minute_mart, cohort):
        events = build_chartevents_original(cohort, {100, 200}).frame
        grid = set(zip(minute_mart.frame["stay_id"],
                       minute_mart.frame["charttime"].dt.floor("min")))
        for _, row in events.iterrows():
            assert (row["stay_id"], row["charttime"].floor("min")) in grid


class TestPersistence:
    def test_round_trip_all_kinds(self, cohort, tmp_path):
        for build in (build_admissions_mart, build_chartevents_original,
                      build_chartevents_by_minute):
            mart = build(cohort, {100, 200})
            save_mart(mart, tmp_path)
            assert load_mart(tmp_path, mart.name).equals(mart)

    def test_rebuild_equals_load(self, cohort, tmp_path):
        first = build_admissions_mart(cohort, {100, 200})
        save_mart(first, tmp_path)
        again = build_admissions_mart(cohort, {100, 200})
        assert load_mart(tmp_path, first.name).equals(again)

    def test_missing_meta_is_schema_error(self, cohort, tmp_path):
        mart = build_admissions_mart(cohort, {100, 200})
        save_mart(mart, tmp_path)
        (tmp_path / mart.name / "meta.json").unlink()
        with pytest.raises(SchemaError, match="meta.json"):
            load_mart(tmp_path, mart.name)

    def test_version_mismatch_is_schema_error(self, cohort, tmp_path):
        import json
        mart = build_admissions_mart(cohort, {100, 200})
        save_mart(mart, tmp_path)
        meta_path = tmp_path / mart.name / "meta.json"
        meta = json.loads(meta_path.read_text())
        meta["schema_version"] = 99
        meta_path.write_text(json.dumps(meta))
        with pytest.raises(SchemaError, match="version"):
            load_mart(tmp_path, mart.name)

    def test_ddl_covers_tables_and_marts(self, cohort, tmp_path):
        mart = build_admissions_mart(cohort, {100, 200})
        text = export_ddl(tmp_path / "schema.sql", [mart])
        for table in ("admissions", "patients", "icustays", "diagnoses_icd",
                      "chartevents", "d_items", "admissions_static"):
            assert f"CREATE TABLE {table} (" in text
        assert '"HR::value_mean_24h" DOUBLE PRECISION' in text
