"""SCADA data model: tables, feature matrices, CSV I/O, labels and splits.

Missing cells are NaN throughout; CSV renders them as empty fields.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, ParseError

logger = logging.getLogger(__name__)

PERIOD_SECONDS = 600
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"
FAMILIES = ("original", "difference", "lag", "moving_stat", "knowledge")

WIND_CHANNELS = ("wind_speed_min", "wind_speed_avg", "wind_speed_max")
ROTOR_CHANNELS = ("rotor_speed_min", "rotor_speed_avg", "rotor_speed_max")
POWER_CHANNELS = ("power_min", "power_avg", "power_max")
ENERGY_CHANNELS = ("energy_total", "energy_diff")
NACELLE_CHANNEL = "nacelle_position"
TEMPERATURE_CHANNELS = (
    "temp_gen_stator",
    "temp_gen_rotor",
    "temp_nacelle",
    "temp_front_hub_bearing",
    "temp_rear_hub_bearing",
    "temp_nacelle_control_cabinet",
    "temp_control_cabinet",
    "temp_tower",
    "temp_transformer",
)
AMBIENT_CHANNEL = "ambient_temperature"

# The 22 original channels in canonical order.
ORIGINAL_CHANNELS = (
    WIND_CHANNELS
    + ROTOR_CHANNELS
    + POWER_CHANNELS
    + ENERGY_CHANNELS
    + (NACELLE_CHANNEL,)
    + TEMPERATURE_CHANNELS
    + (AMBIENT_CHANNEL,)
)


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeriesTable:
    """Channels sampled every 10 minutes starting at ``start_time``.

    ``values`` is (row_count, n_channels); column j belongs to ``channel_ids[j]``.
    """

    start_time: datetime
    channel_ids: tuple[str, ...]
    values: np.ndarray
    period: int = PERIOD_SECONDS

    def __post_init__(self):
        object.__setattr__(self, "channel_ids", tuple(self.channel_ids))
        values = _readonly(self.values)
        if values.ndim != 2 or values.shape[1] != len(self.channel_ids):
            raise DataError(
                f"values shape {values.shape} does not match {len(self.channel_ids)} channels"
            )
        object.__setattr__(self, "values", values)
        if self.period != PERIOD_SECONDS:
            raise DataError(f"period must be {PERIOD_SECONDS} s, got {self.period}")
        if any(not c for c in self.channel_ids):
            raise DataError("empty channel id")
        if len(set(self.channel_ids)) != len(self.channel_ids):
            raise DataError("duplicate channel ids")

    @property
    def row_count(self) -> int:
        return self.values.shape[0]

    @property
    def end_time(self) -> datetime:
        """Exclusive end of the covered span (last row + one period)."""
        return self.start_time + timedelta(seconds=self.period * self.row_count)

    def timestamps(self) -> np.ndarray:
        start = np.datetime64(self.start_time, "s")
        return start + np.arange(self.row_count) * np.timedelta64(self.period, "s")

    def column(self, channel_id: str) -> np.ndarray:
        try:
            j = self.channel_ids.index(channel_id)
        except ValueError:
            raise ConfigError(f"missing source channel '{channel_id}'") from None
        return self.values[:, j]

    def has(self, channel_id: str) -> bool:
        return channel_id in self.channel_ids

    def to_feature_matrix(self) -> FeatureMatrix:
        catalog = [FeatureDescriptor(c, "original", "SCADA channel") for c in self.channel_ids]
        return FeatureMatrix(catalog, self.values)


@dataclass(frozen=True)
class StatusEvent:
    event_time: datetime
    code: str
    is_generator_heating_fault: bool


@dataclass(frozen=True)
class FeatureDescriptor:
    id: str
    family: str
    provenance: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown feature family '{self.family}'")


@dataclass(frozen=True)
class FeatureMatrix:
    catalog: tuple[FeatureDescriptor, ...]
    data: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "catalog", tuple(self.catalog))
        data = _readonly(self.data)
        if data.ndim != 2:
            raise DataError("feature data must be two-dimensional")
        if data.shape[1] != len(self.catalog):
            raise DataError(
                f"catalog has {len(self.catalog)} entries but data has {data.shape[1]} columns"
            )
        object.__setattr__(self, "data", data)
        index = {d.id: j for j, d in enumerate(self.catalog)}
        if len(index) != len(self.catalog):
            dupes = sorted({d.id for d in self.catalog if sum(e.id == d.id for e in self.catalog) > 1})
            raise DataError(f"duplicate feature ids: {', '.join(dupes)}")
        object.__setattr__(self, "_index", index)

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.catalog]

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    def index_of(self, feature_id: str) -> int:
        try:
            return self._index[feature_id]
        except KeyError:
            raise ConfigError(f"unknown feature '{feature_id}'") from None

    def column(self, feature_id: str) -> np.ndarray:
        return self.data[:, self.index_of(feature_id)]

    def select(self, feature_ids: Sequence[str]) -> FeatureMatrix:
        cols = [self.index_of(f) for f in feature_ids]
        return FeatureMatrix([self.catalog[j] for j in cols], self.data[:, cols])

    def take_rows(self, rows) -> FeatureMatrix:
        return FeatureMatrix(self.catalog, self.data[rows])

    def family_counts(self) -> dict[str, int]:
        counts = {f: 0 for f in FAMILIES}
        for d in self.catalog:
            counts[d.family] += 1
        return counts

    @staticmethod
    def hstack(matrices: Iterable[FeatureMatrix]) -> FeatureMatrix:
        matrices = list(matrices)
        if not matrices:
            raise DataError("nothing to stack")
        rows = {m.n_rows for m in matrices}
        if len(rows) != 1:
            raise DataError(f"row counts differ: {sorted(rows)}")
        catalog = [d for m in matrices for d in m.catalog]
        return FeatureMatrix(catalog, np.hstack([m.data for m in matrices]))


@dataclass(frozen=True)
class LabeledDataset:
    features: FeatureMatrix
    labels: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        labels = labels.astype(np.int8)
        labels.setflags(write=False)
        ts = np.array(self.timestamps, dtype="datetime64[s]", copy=True)
        ts.setflags(write=False)
        if not (len(labels) == self.features.n_rows == len(ts)):
            raise DataError(
                f"length mismatch: labels {len(labels)}, features {self.features.n_rows}, "
                f"timestamps {len(ts)}"
            )
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "timestamps", ts)

    def __len__(self):
        return len(self.labels)

    def take_rows(self, rows) -> LabeledDataset:
        return LabeledDataset(self.features.take_rows(rows), self.labels[rows], self.timestamps[rows])

    def with_features(self, features: FeatureMatrix) -> LabeledDataset:
        return replace(self, features=features)


# --------------------------------------------------------------------------
# CSV I/O


def format_timestamps(ts: np.ndarray) -> list[str]:
    return [str(t) for t in np.asarray(ts, dtype="datetime64[s]")]


def _parse_timestamp_column(raw: pd.Series, first_line: int) -> np.ndarray:
    parsed = pd.to_datetime(raw, format=TIMESTAMP_FORMAT, errors="coerce")
    bad = np.flatnonzero(parsed.isna().to_numpy())
    if bad.size:
        i = int(bad[0])
        raise ParseError(f"malformed timestamp {raw.iloc[i]!r}", line=first_line + i)
    return parsed.to_numpy().astype("datetime64[s]")


def _read_frame(path: Path) -> tuple[pd.DataFrame, int]:
    """Read a CSV, skipping leading '#' comment lines. Returns (frame, header line number)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    skip = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                skip += 1
                continue
            break
    try:
        frame = pd.read_csv(
            path,
            skiprows=skip,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
        )
    except pd.errors.EmptyDataError:
        raise DataError(f"empty file: {path}") from None
    return frame, skip + 1


def _to_float(frame: pd.DataFrame, columns: Sequence[str], first_line: int) -> np.ndarray:
    out = np.empty((len(frame), len(columns)), dtype=np.float64)
    for j, c in enumerate(columns):
        raw = frame[c].to_numpy(dtype=str)
        raw = np.where(np.char.str_len(np.char.strip(raw)) == 0, "nan", raw)
        try:
            out[:, j] = raw.astype(np.float64)
        except ValueError:
            for i, v in enumerate(raw):
                try:
                    float(v)
                except ValueError:
                    raise ParseError(f"non-numeric value {v!r} in column '{c}'", line=first_line + i) from None
            raise
    return out


def ingest_csv(path, schema: Sequence[str] | None = None) -> TimeSeriesTable:
    """Read a channel CSV into a gap-filled 10-minute table.

    ``schema`` lists the channels to keep (in that order); other channels are
    ignored with a logged warning. ``None`` keeps every channel in file order.
    """
    frame, header_line = _read_frame(path)
    if len(frame) == 0:
        raise DataError(f"empty file: {path}")
    if not len(frame.columns) or frame.columns[0] != "timestamp":
        raise ParseError("first column must be 'timestamp'", line=header_line)
    channels_in_file = [c for c in frame.columns[1:]]
    if schema is None:
        schema = channels_in_file
    missing = [c for c in schema if c not in channels_in_file]
    if missing:
        raise DataError(f"channel '{missing[0]}' not present in {path}")
    extras = [c for c in channels_in_file if c not in schema]
    if extras:
        logger.warning("ignored %d channel(s) not in schema: %s", len(extras), ", ".join(extras))

    first_line = header_line + 1
    ts = _parse_timestamp_column(frame["timestamp"], first_line)
    steps = np.diff(ts).astype(np.int64)
    if (steps == 0).any():
        i = int(np.flatnonzero(steps == 0)[0]) + 1
        raise DataError(f"duplicate timestamp {ts[i]} at line {first_line + i}")
    if (steps < 0).any():
        i = int(np.flatnonzero(steps < 0)[0]) + 1
        raise DataError(f"timestamps not increasing at line {first_line + i}")
    offsets = (ts - ts[0]).astype(np.int64)
    if (offsets % PERIOD_SECONDS).any():
        i = int(np.flatnonzero(offsets % PERIOD_SECONDS)[0])
        raise DataError(f"timestamp {ts[i]} at line {first_line + i} is off the 10-minute cadence")

    values = _to_float(frame, schema, first_line)
    rows = offsets // PERIOD_SECONDS
    n = int(rows[-1]) + 1
    filled = np.full((n, len(schema)), np.nan)
    filled[rows] = values
    if n > len(rows):
        logger.info("filled %d missing 10-minute rows", n - len(rows))
    start = pd.Timestamp(ts[0]).to_pydatetime()
    return TimeSeriesTable(start, tuple(schema), filled)


def format_value(x: float) -> str:
    return "" if x != x else repr(float(x))


def _write_rows(path, header: Sequence[str], columns: Sequence[Sequence[str]], comment: str | None):
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(row) + "\n")


def _format_matrix(values: np.ndarray) -> list[list[str]]:
    # repr() gives the shortest string that round-trips exactly.
    return [[format_value(x) for x in values[:, j].tolist()] for j in range(values.shape[1])]


def write_csv(table: TimeSeriesTable, path, comment: str | None = None) -> None:
    _write_rows(
        path,
        ["timestamp", *table.channel_ids],
        [format_timestamps(table.timestamps()), *_format_matrix(table.values)],
        comment,
    )


def read_status_csv(path) -> list[StatusEvent]:
    frame, header_line = _read_frame(path)
    expected = ["timestamp", "code", "is_heating_fault"]
    if list(frame.columns) != expected:
        raise ParseError(f"status header must be {','.join(expected)}", line=header_line)
    if len(frame) == 0:
        return []
    ts = _parse_timestamp_column(frame["timestamp"], header_line + 1)
    events = []
    for i, (t, code, flag) in enumerate(zip(ts, frame["code"], frame["is_heating_fault"])):
        if flag.strip() not in ("0", "1"):
            raise ParseError(f"is_heating_fault must be 0 or 1, got {flag!r}", line=header_line + 1 + i)
        events.append(StatusEvent(pd.Timestamp(t).to_pydatetime(), code, flag.strip() == "1"))
    return events


def write_status_csv(events: Sequence[StatusEvent], path, comment: str | None = None) -> None:
    _write_rows(
        path,
        ["timestamp", "code", "is_heating_fault"],
        [
            [e.event_time.strftime(TIMESTAMP_FORMAT) for e in events],
            [e.code for e in events],
            ["1" if e.is_generator_heating_fault else "0" for e in events],
        ],
        comment,
    )


def write_feature_csv(ds: LabeledDataset, path, comment: str | None = None) -> None:
    _write_rows(
        path,
        ["timestamp", "label", *ds.features.ids],
        [
            format_timestamps(ds.timestamps),
            [str(int(v)) for v in ds.labels],
            *_format_matrix(ds.features.data),
        ],
        comment,
    )


def write_catalog(catalog: Sequence[FeatureDescriptor], path, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for d in catalog:
            fh.write(f"{d.id}\t{d.family}\t{d.provenance}\n")


def read_catalog(path) -> list[FeatureDescriptor]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("#") or not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ParseError("catalog lines need id, family, provenance", line=lineno)
            out.append(FeatureDescriptor(*parts))
    return out


def read_feature_csv(path, catalog: Sequence[FeatureDescriptor] | None = None) -> LabeledDataset:
    """Inverse of :func:`write_feature_csv`. Without a catalog every column is 'original'."""
    frame, header_line = _read_frame(path)
    if list(frame.columns[:2]) != ["timestamp", "label"]:
        raise ParseError("feature CSV must start with timestamp,label", line=header_line)
    ids = list(frame.columns[2:])
    if catalog is None:
        catalog = [FeatureDescriptor(c, "original", "") for c in ids]
    elif [d.id for d in catalog] != ids:
        raise DataError("catalog does not match feature CSV columns")
    ts = _parse_timestamp_column(frame["timestamp"], header_line + 1)
    labels = frame["label"].astype(int).to_numpy()
    data = _to_float(frame, ids, header_line + 1)
    return LabeledDataset(FeatureMatrix(catalog, data), labels, ts)


# --------------------------------------------------------------------------
# labels and splits


def align_status_labels(table: TimeSeriesTable, events: Sequence[StatusEvent]) -> LabeledDataset:
    """Label every 10-minute interval [t, t+period).

    A status holds from its event time until the next event. An interval is a
    fault (1) iff a generator-heating status is active at any instant inside it.
    """
    start = np.datetime64(table.start_time, "s")
    span_end = table.row_count * table.period
    kept = []
    for e in events:
        off = int((np.datetime64(e.event_time, "s") - start).astype(np.int64))
        if 0 <= off <= span_end:
            kept.append((off, e.is_generator_heating_fault))
    ignored = len(events) - len(kept)
    if ignored:
        logger.warning("ignored %d status event(s) outside the table span", ignored)
    offsets = [o for o, _ in kept]
    if offsets != sorted(offsets):
        raise DataError("status events must be sorted by event time")

    labels = np.zeros(table.row_count, dtype=np.int8)
    p = table.period
    for k, (a, is_fault) in enumerate(kept):
        if not is_fault:
            continue
        b = kept[k + 1][0] if k + 1 < len(kept) else None
        first = a // p
        if b is None:
            last = table.row_count
        else:
            if b <= a:
                continue
            last = -(-b // p)  # ceil: intervals starting before b
        labels[first:min(last, table.row_count)] = 1
    return LabeledDataset(table.to_feature_matrix(), labels, table.timestamps())


def chronological_split(ds: LabeledDataset, train_fraction: float) -> tuple[LabeledDataset, LabeledDataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(ds)
    if n < 2:
        raise DataError("need at least 2 rows to split")
    cut = int(np.floor(train_fraction * n))
    if cut == 0 or cut == n:
        raise ConfigError(f"train_fraction {train_fraction} leaves an empty split of {n} rows")
    return ds.take_rows(slice(0, cut)), ds.take_rows(slice(cut, n))
