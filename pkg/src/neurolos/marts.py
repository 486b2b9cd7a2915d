"""Data marts distilled from the raw tables.

Three reusable marts serve the models:

* static mart: one row per qualifying ICU stay with demographics and
  first-24h test aggregates, fully imputed, labeled with the LOS class;
* event mart: one row per (stay, charttime) where at least one test was
  observed;
* minute mart: one row per minute of each stay, observations snapped to
  their containing minute, unobserved minutes masked out.

Both time marts carry ``remaining_los_days`` so windows can be labeled
with the class of the stay time still ahead.  Marts persist as a
``<name>/data.csv`` plus ``<name>/meta.json`` pair and round-trip exactly.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError, ValidationError
from .synthgen import VENT_MODES
from .tables import TABLE_COLUMNS, RawTables

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
BIN_EDGES_DAYS = (2.0, 7.0)
NEURO_ICD_PREFIXES = ("I61", "I63", "G41")
DAYTIME_NAMES = ("night", "morning", "day", "evening")

DEMOGRAPHIC_CATEGORICALS = ["gender", "insurance", "language", "marital_status",
                            "race", "first_careunit", "admission_daytime",
                            "admission_month"]
DEMOGRAPHIC_NUMERICS = ["anchor_age", "anchor_year"]


class LosClass(enum.IntEnum):
    SHORT = 0
    MEDIUM = 1
    LONG = 2


def bin_los(los: float) -> LosClass:
    """Class of a stay length in fractional days: [0,2) / [2,7) / [7,inf)."""
    if not los > 0:
        raise ValidationError(f"los must be positive, got {los}")
    if los < BIN_EDGES_DAYS[0]:
        return LosClass.SHORT
    if los < BIN_EDGES_DAYS[1]:
        return LosClass.MEDIUM
    return LosClass.LONG


def los_to_classes(los: np.ndarray) -> np.ndarray:
    """Vectorized :func:`bin_los` returning int64 codes."""
    los = np.asarray(los, dtype=np.float64)
    if not (los > 0).all():
        raise ValidationError(f"los must be positive, got min {los.min()}")
    return np.where(los < BIN_EDGES_DAYS[0], LosClass.SHORT,
                    np.where(los < BIN_EDGES_DAYS[1], LosClass.MEDIUM,
                             LosClass.LONG)).astype(np.int64)


def filter_neuro_admissions(diagnoses: pd.DataFrame) -> set[int]:
    """Admissions whose primary diagnosis code starts with I61, I63 or G41."""
    primary = diagnoses[diagnoses["seq_num"] == 1]
    hit = primary["icd_code"].astype(str).str.startswith(NEURO_ICD_PREFIXES)
    return set(primary.loc[hit, "hadm_id"].astype(int))


@dataclasses.dataclass
class Mart:
    """A persisted analysis table plus the metadata needed to reuse it."""

    name: str
    kind: str  # static | events | minute
    frame: pd.DataFrame
    meta: dict

    def equals(self, other: "Mart") -> bool:
        return (self.name == other.name and self.kind == other.kind
                and self.meta == other.meta and self.frame.equals(other.frame))


def _item_lookup(d_items: pd.DataFrame, test_list) -> pd.DataFrame:
    known = list(d_items["abbreviation"])
    if test_list is None:
        test_list = known
    unknown = [t for t in test_list if t not in known]
    if unknown:
        raise ValidationError(f"unknown test abbreviations: {unknown}")
    items = d_items.set_index("abbreviation").loc[list(test_list)].reset_index()
    return items


def _check_selection(raw: RawTables, selected_hadm) -> set[int]:
    selected = set(int(h) for h in selected_hadm)
    known = set(raw.admissions["hadm_id"])
    if not selected <= known:
        raise ValidationError(
            f"selected_hadm contains ids not in admissions: {sorted(selected - known)[:5]}")
    return selected


def _prepare_events(raw: RawTables, stays: pd.DataFrame, items: pd.DataFrame):
    """Join chartevents to stays and parse values; returns long-form rows.

    Categorical tests are mapped to their level index so every mart value
    column is numeric.  Events referencing unknown itemids or falling
    outside their stay window are skipped and counted.
    """
    events = raw.chartevents[raw.chartevents["stay_id"].isin(set(stays["stay_id"]))]
    skipped = {"unknown_itemid": 0, "outside_stay": 0, "unparsable_value": 0}

    known_items = events["itemid"].isin(set(items["itemid"]))
    skipped["unknown_itemid"] = int((~known_items).sum())
    events = events[known_items]

    events = events.merge(stays[["stay_id", "intime", "outtime"]], on="stay_id")
    inside = (events["charttime"] >= events["intime"]) & \
        (events["charttime"] < events["outtime"])
    skipped["outside_stay"] = int((~inside).sum())
    events = events[inside]

    by_item = items.set_index("itemid")
    events = events.assign(abbreviation=events["itemid"].map(by_item["abbreviation"]))

    categorical = set(items.loc[items["lownormalvalue"].isna()
                                & items["highnormalvalue"].isna(), "abbreviation"])
    vent_codes = {mode: float(i) for i, mode in enumerate(VENT_MODES)}
    is_cat = events["abbreviation"].isin(categorical)
    numeric_part = pd.to_numeric(events.loc[~is_cat, "value"], errors="coerce")
    cat_part = events.loc[is_cat, "value"].map(vent_codes)
    fvalue = pd.concat([numeric_part, cat_part]).reindex(events.index)
    bad = fvalue.isna()
    skipped["unparsable_value"] = int(bad.sum())
    events = events[~bad].assign(fvalue=fvalue[~bad].astype(np.float64))

    low = events["itemid"].map(by_item["lownormalvalue"])
    high = events["itemid"].map(by_item["highnormalvalue"])
    in_norm = np.where(low.isna() | high.isna(), 1.0,
                       ((events["fvalue"] >= low) & (events["fvalue"] <= high))
                       .astype(np.float64))
    events = events.assign(in_norm=in_norm)

    total_skipped = sum(skipped.values())
    if total_skipped:
        logger.warning("mart build skipped %d chartevents: %s", total_skipped, skipped)
    return events, skipped, sorted(categorical)


def _base_meta(items: pd.DataFrame, skipped: dict, categorical: list[str]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "bin_edges_days": list(BIN_EDGES_DAYS),
        "tests": list(items["abbreviation"]),
        "categorical_tests": categorical,
        "categorical_levels": {t: list(VENT_MODES) for t in categorical},
        "skipped_events": skipped,
    }


def build_admissions_mart(raw: RawTables, selected_hadm, test_list=None) -> Mart:
    """Static per-stay mart: demographics plus first-24h test aggregates.

    Missing numeric aggregates are imputed with the median over the built
    rows and missing categorical ones with the most frequent level; the
    imputation values are stored in the mart metadata for reuse.
    """
    selected = _check_selection(raw, selected_hadm)
    items = _item_lookup(raw.d_items, test_list)
    stays = raw.icustays[raw.icustays["hadm_id"].isin(selected)].copy()
    if stays.empty:
        raise DataError("no icustays match the selected admissions")

    events, skipped, categorical = _prepare_events(raw, stays, items)
    cutoff = stays.set_index("stay_id")["intime"] + pd.Timedelta(hours=24)
    events = events[events["charttime"] <= events["stay_id"].map(cutoff)]

    rows = stays.merge(raw.admissions, on="hadm_id") \
        .merge(raw.patients, on="subject_id")
    hour = rows["admittime"].dt.hour
    rows["admission_daytime"] = pd.cut(
        hour, bins=[0, 6, 12, 18, 24], right=False, labels=DAYTIME_NAMES).astype(str)
    rows["admission_month"] = rows["admittime"].dt.month.map("{:02d}".format)
    rows["label"] = los_to_classes(rows["los"].to_numpy())

    columns = ["hadm_id", "stay_id", "label"] + DEMOGRAPHIC_CATEGORICALS \
        + DEMOGRAPHIC_NUMERICS
    mart = rows[columns].copy()

    grouped = events.groupby(["stay_id", "abbreviation"], sort=False)
    mean_value = grouped["fvalue"].mean()
    share_in_norm = grouped["in_norm"].mean()
    for test in items["abbreviation"]:
        if test in categorical:
            # modal level of the categorical test over the window
            sub = events[events["abbreviation"] == test]
            counts = sub.groupby(["stay_id", "fvalue"]).size().reset_index(name="n")
            counts = counts.sort_values(["stay_id", "n", "fvalue"],
                                        ascending=[True, False, True])
            modal = counts.drop_duplicates("stay_id").set_index("stay_id")["fvalue"]
            levels = VENT_MODES
            mode_col = mart["stay_id"].map(modal).map(
                lambda code: levels[int(code)] if pd.notna(code) else np.nan)
            mart[f"{test}::mode_24h"] = mode_col.astype(object)
        else:
            key = mean_value.xs(test, level="abbreviation") \
                if test in mean_value.index.get_level_values(1) else pd.Series(dtype=float)
            mart[f"{test}::value_mean_24h"] = mart["stay_id"].map(key)
        key = share_in_norm.xs(test, level="abbreviation") \
            if test in share_in_norm.index.get_level_values(1) else pd.Series(dtype=float)
        mart[f"{test}::in_norm_share_24h"] = mart["stay_id"].map(key)

    medians: dict[str, float] = {}
    modes: dict[str, str] = {}
    for col in mart.columns:
        if col.endswith("::in_norm_share_24h"):
            mart[col] = mart[col].fillna(1.0)
        elif col.endswith("::value_mean_24h"):
            med = float(mart[col].median())
            if np.isnan(med):
                med = 0.0
            medians[col] = med
            mart[col] = mart[col].fillna(med)
        elif col.endswith("::mode_24h"):
            observed = mart[col].dropna()
            mode = observed.value_counts().index[0] if len(observed) else VENT_MODES[0]
            modes[col] = mode
            mart[col] = mart[col].fillna(mode)

    mart = mart.sort_values("stay_id", ignore_index=True)
    meta = _base_meta(items, skipped, categorical)
    meta.update({"kind": "static", "imputation_medians": medians,
                 "imputation_modes": modes,
                 "in_norm_share_default": 1.0})
    return Mart(name="admissions_static", kind="static", frame=mart, meta=meta)


def _wide_test_columns(pivoted: pd.DataFrame, tests) -> pd.DataFrame:
    """Order per-test triples (value, in_norm, mask) in catalog order."""
    out = {}
    for test in tests:
        value = pivoted.get(("fvalue", test))
        norm = pivoted.get(("in_norm", test))
        if value is None:
            value = pd.Series(np.nan, index=pivoted.index)
            norm = pd.Series(np.nan, index=pivoted.index)
        mask = value.notna().astype(np.float64)
        out[f"{test}::value"] = value.astype(np.float64)
        out[f"{test}::in_norm"] = norm.astype(np.float64)
        out[f"{test}::mask"] = mask
    return pd.DataFrame(out, index=pivoted.index)


def build_chartevents_original(raw: RawTables, selected_hadm, test_list=None) -> Mart:
    """Event mart: one row per (stay, charttime) with at least one test observed."""
    selected = _check_selection(raw, selected_hadm)
    items = _item_lookup(raw.d_items, test_list)
    stays = raw.icustays[raw.icustays["hadm_id"].isin(selected)]
    events, skipped, categorical = _prepare_events(raw, stays, items)

    # last observation wins on exact (stay, time, test) collisions
    events = events.sort_values(["stay_id", "charttime"], kind="stable")
    events = events.drop_duplicates(["stay_id", "charttime", "abbreviation"], keep="last")
    pivoted = events.pivot(index=["stay_id", "charttime"],
                           columns="abbreviation", values=["fvalue", "in_norm"])
    wide = _wide_test_columns(pivoted, items["abbreviation"])
    wide = wide.reset_index().sort_values(["stay_id", "charttime"], ignore_index=True)
    wide["charttime"] = wide["charttime"].astype("datetime64[s]")

    by_stay = stays.set_index("stay_id")
    wide.insert(1, "hadm_id", wide["stay_id"].map(by_stay["hadm_id"]).astype(np.int64))
    remaining = (wide["stay_id"].map(by_stay["outtime"]) - wide["charttime"])
    wide.insert(3, "remaining_los_days",
                remaining.dt.total_seconds().to_numpy() / 86400.0)

    meta = _base_meta(items, skipped, categorical)
    meta["kind"] = "events"
    return Mart(name="chartevents_original", kind="events", frame=wide, meta=meta)


def build_chartevents_by_minute(raw: RawTables, selected_hadm, test_list=None) -> Mart:
    """Minute mart: one row per minute of each stay; floor snap, last wins."""
    selected = _check_selection(raw, selected_hadm)
    items = _item_lookup(raw.d_items, test_list)
    stays = raw.icustays[raw.icustays["hadm_id"].isin(selected)] \
        .sort_values("stay_id", ignore_index=True)
    events, skipped, categorical = _prepare_events(raw, stays, items)

    seconds = (stays["outtime"] - stays["intime"]).dt.total_seconds().to_numpy()
    n_minutes = np.ceil(seconds / 60.0).astype(np.int64)
    grid = pd.DataFrame({
        "stay_id": np.repeat(stays["stay_id"].to_numpy(), n_minutes),
        "minute": np.concatenate([np.arange(m, dtype=np.int64) for m in n_minutes]),
    })

    by_stay = stays.set_index("stay_id")
    offset = (events["charttime"] - events["stay_id"].map(by_stay["intime"]))
    events = events.assign(minute=(offset.dt.total_seconds() // 60.0).astype(np.int64))
    events = events.sort_values(["stay_id", "charttime"], kind="stable")
    events = events.drop_duplicates(["stay_id", "minute", "abbreviation"], keep="last")
    pivoted = events.pivot(index=["stay_id", "minute"],
                           columns="abbreviation", values=["fvalue", "in_norm"])
    pivoted = pivoted.reindex(pd.MultiIndex.from_frame(grid))
    wide = _wide_test_columns(pivoted, items["abbreviation"])
    wide = wide.reset_index().sort_values(["stay_id", "minute"], ignore_index=True)

    wide.insert(1, "hadm_id", wide["stay_id"].map(by_stay["hadm_id"]).astype(np.int64))
    row_time = wide["stay_id"].map(by_stay["intime"]) \
        + pd.to_timedelta(wide["minute"] * 60, unit="s")
    wide.insert(2, "charttime", row_time.astype("datetime64[s]"))
    remaining = wide["stay_id"].map(by_stay["outtime"]) - wide["charttime"]
    wide.insert(4, "remaining_los_days",
                remaining.dt.total_seconds().to_numpy() / 86400.0)

    meta = _base_meta(items, skipped, categorical)
    meta["kind"] = "minute"
    return Mart(name="chartevents_by_minute", kind="minute", frame=wide, meta=meta)


_SQL_TYPES = {"int64": "BIGINT", "float64": "DOUBLE PRECISION",
              "datetime64[s]": "TIMESTAMP", "object": "TEXT"}


def _column_kinds(frame: pd.DataFrame) -> list[list[str]]:
    # list of [name, dtype] pairs: keeps column order under sorted JSON keys
    return [[col, str(frame[col].dtype)] for col in frame.columns]


def save_mart(mart: Mart, root) -> Path:
    """Persist as ``<root>/<name>/data.csv`` + ``meta.json``."""
    mart_dir = Path(root) / mart.name
    mart_dir.mkdir(parents=True, exist_ok=True)
    mart.frame.to_csv(mart_dir / "data.csv", index=False, lineterminator="\n",
                      date_format="%Y-%m-%dT%H:%M:%S")
    meta = dict(mart.meta)
    meta["name"] = mart.name
    meta["kind"] = mart.kind
    meta["columns"] = _column_kinds(mart.frame)
    (mart_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return mart_dir


def load_mart(root, name: str) -> Mart:
    """Inverse of :func:`save_mart`; exact value round-trip."""
    mart_dir = Path(root) / name
    meta_path = mart_dir / "meta.json"
    data_path = mart_dir / "data.csv"
    if not meta_path.exists():
        raise SchemaError(f"mart {name}: missing {meta_path}")
    if not data_path.exists():
        raise SchemaError(f"mart {name}: missing {data_path}")
    meta = json.loads(meta_path.read_text())
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"mart {name}: schema version {meta.get('schema_version')} "
            f"!= supported {SCHEMA_VERSION}")
    columns = meta.pop("columns")
    kind = meta.pop("kind")
    meta.pop("name")
    meta["kind"] = kind

    frame = pd.read_csv(data_path, dtype={c: "object" for c, _ in columns})
    if list(frame.columns) != [c for c, _ in columns]:
        raise SchemaError(f"mart {name}: column mismatch with metadata")
    for col, dtype in columns:
        if dtype.startswith("datetime64"):
            frame[col] = pd.to_datetime(frame[col], format="%Y-%m-%dT%H:%M:%S") \
                .astype(dtype)
        elif dtype in ("int64", "float64"):
            frame[col] = frame[col].astype(dtype)
    return Mart(name=name, kind=kind, frame=frame, meta=meta)


def export_ddl(path, marts: list[Mart] | None = None) -> str:
    """Write CREATE TABLE statements mirroring raw tables and mart schemas."""
    from .tables import _FLOAT_COLUMNS, _INT_COLUMNS, _TIME_COLUMNS

    statements = []
    for table, columns in TABLE_COLUMNS.items():
        lines = []
        for col in columns:
            if col in _INT_COLUMNS.get(table, []):
                sql = "BIGINT"
            elif col in _FLOAT_COLUMNS.get(table, []):
                sql = "DOUBLE PRECISION"
            elif col in _TIME_COLUMNS.get(table, []):
                sql = "TIMESTAMP"
            else:
                sql = "TEXT"
            lines.append(f'    "{col}" {sql}')
        statements.append(f"CREATE TABLE {table} (\n" + ",\n".join(lines) + "\n);")

    for mart in marts or []:
        lines = [f'    "{col}" {_SQL_TYPES[str(dtype)]}'
                 for col, dtype in mart.frame.dtypes.items()]
        statements.append(f"CREATE TABLE {mart.name} (\n" + ",\n".join(lines) + "\n);")

    text = "\n\n".join(statements) + "\n"
    Path(path).write_text(text)
    return text
