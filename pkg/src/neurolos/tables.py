"""Source-table schemas and delimited-file round-trips.

Six tables shaped like the critical-care originals: ``admissions``,
``patients``, ``icustays``, ``diagnoses_icd``, ``chartevents`` and
``d_items``.  Files are comma-delimited with a header row and RFC-4180
quoting; timestamps are ISO-8601 at second precision; blank fields denote
missing values.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"

# canonical column order per table; second set = timestamp columns
TABLE_COLUMNS = {
    "admissions": ["subject_id", "hadm_id", "admittime", "dischtime", "deathtime",
                   "insurance", "language", "marital_status", "race"],
    "patients": ["subject_id", "gender", "anchor_age", "anchor_year",
                 "anchor_year_group", "dod"],
    "icustays": ["stay_id", "hadm_id", "first_careunit", "last_careunit",
                 "intime", "outtime", "los"],
    "diagnoses_icd": ["hadm_id", "seq_num", "icd_code", "icd_version"],
    "chartevents": ["stay_id", "hadm_id", "charttime", "itemid", "value", "valueuom"],
    "d_items": ["itemid", "label", "abbreviation", "lownormalvalue",
                "highnormalvalue", "category", "unitname"],
}

_TIME_COLUMNS = {
    "admissions": ["admittime", "dischtime", "deathtime"],
    "patients": ["dod"],
    "icustays": ["intime", "outtime"],
    "diagnoses_icd": [],
    "chartevents": ["charttime"],
    "d_items": [],
}

_INT_COLUMNS = {
    "admissions": ["subject_id", "hadm_id"],
    "patients": ["subject_id", "anchor_age", "anchor_year"],
    "icustays": ["stay_id", "hadm_id"],
    "diagnoses_icd": ["hadm_id", "seq_num", "icd_version"],
    "chartevents": ["stay_id", "hadm_id", "itemid"],
    "d_items": ["itemid"],
}

_FLOAT_COLUMNS = {
    "icustays": ["los"],
    "d_items": ["lownormalvalue", "highnormalvalue"],
}


@dataclasses.dataclass
class RawTables:
    """In-memory image of the six source tables."""

    admissions: pd.DataFrame
    patients: pd.DataFrame
    icustays: pd.DataFrame
    diagnoses_icd: pd.DataFrame
    chartevents: pd.DataFrame
    d_items: pd.DataFrame

    def __iter__(self):
        for name in TABLE_COLUMNS:
            yield name, getattr(self, name)

    def equals(self, other: "RawTables") -> bool:
        return all(frame.equals(getattr(other, name)) for name, frame in self)


def _check_columns(name: str, frame: pd.DataFrame) -> pd.DataFrame:
    want = TABLE_COLUMNS[name]
    missing = [c for c in want if c not in frame.columns]
    extra = [c for c in frame.columns if c not in want]
    if missing or extra:
        raise SchemaError(f"table {name}: missing columns {missing}, unexpected {extra}")
    return frame[want]


def write_tables(raw: RawTables, out_dir) -> list[Path]:
    """Write one ``<name>.csv`` per table; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, frame in raw:
        frame = _check_columns(name, frame)
        path = out_dir / f"{name}.csv"
        frame.to_csv(path, index=False, lineterminator="\n",
                     date_format=TIMESTAMP_FORMAT)
        paths.append(path)
    return paths


def read_tables(in_dir) -> RawTables:
    """Read the six table files back; inverse of :func:`write_tables`."""
    in_dir = Path(in_dir)
    frames = {}
    for name, columns in TABLE_COLUMNS.items():
        path = in_dir / f"{name}.csv"
        if not path.exists():
            raise DataError(f"missing table file: {path}")
        frame = pd.read_csv(path, dtype={c: "object" for c in columns})
        frame = _check_columns(name, frame)
        for col in _TIME_COLUMNS[name]:
            frame[col] = pd.to_datetime(frame[col], format=TIMESTAMP_FORMAT).astype("datetime64[s]")
        for col in _INT_COLUMNS[name]:
            frame[col] = frame[col].astype(np.int64)
        for col in _FLOAT_COLUMNS.get(name, []):
            frame[col] = frame[col].astype(np.float64)
        frames[name] = frame
    raw = RawTables(**frames)
    validate_tables(raw)
    return raw


def validate_tables(raw: RawTables) -> None:
    """Check key uniqueness, time ordering, and cross-table references."""
    for name, key in [("admissions", "hadm_id"), ("patients", "subject_id"),
                      ("icustays", "stay_id"), ("d_items", "itemid")]:
        frame = getattr(raw, name)
        if frame[key].duplicated().any():
            dup = frame.loc[frame[key].duplicated(), key].iloc[0]
            raise DataError(f"table {name}: duplicate {key} {dup}")

    stays = raw.icustays
    if (stays["los"] <= 0).any():
        raise DataError("table icustays: los must be positive")
    if (stays["intime"] >= stays["outtime"]).any():
        raise DataError("table icustays: intime must precede outtime")

    known_hadm = set(raw.admissions["hadm_id"])
    for name in ("icustays", "diagnoses_icd", "chartevents"):
        bad = set(getattr(raw, name)["hadm_id"]) - known_hadm
        if bad:
            raise DataError(f"table {name}: hadm_id {sorted(bad)[0]} not in admissions")
    bad = set(raw.admissions["subject_id"]) - set(raw.patients["subject_id"])
    if bad:
        raise DataError(f"table admissions: subject_id {sorted(bad)[0]} not in patients")
    bad = set(raw.chartevents["stay_id"]) - set(raw.icustays["stay_id"])
    if bad:
        raise DataError(f"table chartevents: stay_id {sorted(bad)[0]} not in icustays")
