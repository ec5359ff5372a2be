"""Ingestion of meter and weather CSVs onto a uniform hourly grid.

Consumption files are two-column ``timestamp,power_kW`` CSVs at 1-minute or
15-minute resolution. Weather files are hourly with a fixed header. Gaps are
represented as NaN in the value array; timestamps are epoch seconds and the
grid is implied by ``start + i * step``.

Naive timestamps are interpreted in a fixed local offset (default UTC-05:00,
standard time for the source region, no DST) and stored as UTC epoch seconds.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

HOUR = 3600

#: Fixed local offset applied to naive timestamps (hours east of UTC).
DEFAULT_UTC_OFFSET_HOURS = -5.0

WEATHER_NUMERIC_COLUMNS = [
    "temperature", "apparentTemperature", "cloudCover", "precipProbability",
    "precipIntensity", "visibility", "windSpeed", "windBearing",
    "humidity", "pressure", "dewPoint",
]
WEATHER_COLUMNS = ["time", "summary", "icon"] + WEATHER_NUMERIC_COLUMNS


class DataError(ValueError):
    """Unrecoverable ingestion problem (bad file, misaligned series...)."""


def parse_timestamp(text: str, utc_offset_hours: float = DEFAULT_UTC_OFFSET_HOURS) -> int:
    """Parse an ISO-8601 timestamp or epoch seconds to UTC epoch seconds.

    Naive ISO timestamps are treated as local time at ``utc_offset_hours``.
    """
    text = text.strip()
    try:
        return int(float(text))
    except ValueError:
        pass
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone(timedelta(hours=utc_offset_hours)))
    return int(dt.timestamp())


def format_timestamp(epoch: int, utc_offset_hours: float = DEFAULT_UTC_OFFSET_HOURS) -> str:
    tz = timezone(timedelta(hours=utc_offset_hours))
    return datetime.fromtimestamp(epoch, tz).strftime("%Y-%m-%dT%H:%M:%S")


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled series; NaN entries mark gaps."""

    start: int        # UTC epoch seconds of the first sample
    step: int         # seconds between samples
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.step <= 0:
            raise DataError("step must be positive")

    def __len__(self):
        return len(self.values)

    def timestamp(self, i: int) -> int:
        return self.start + i * self.step

    @property
    def timestamps(self) -> np.ndarray:
        return self.start + self.step * np.arange(len(self.values), dtype=np.int64)

    def gap_count(self) -> int:
        return int(np.isnan(self.values).sum())


@dataclass
class IngestReport:
    rows_parsed: int = 0
    rows_malformed: int = 0
    negatives_dropped: int = 0
    hours_dropped: int = 0


@dataclass(frozen=True)
class WeatherTable:
    """Hourly weather rows; numeric columns follow WEATHER_NUMERIC_COLUMNS."""

    times: np.ndarray               # int64 epoch seconds, strictly increasing
    summary: tuple
    icon: tuple
    numeric: np.ndarray             # (N, 11) float64, NaN for missing

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.int64)
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise DataError("weather timestamps must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "numeric", np.asarray(self.numeric, dtype=np.float64))

    def __len__(self):
        return len(self.times)

    def row(self, i: int):
        return self.summary[i], self.icon[i], self.numeric[i]


@dataclass(frozen=True)
class AlignedDataset:
    """Hour-aligned consumption and weather; no missing values remain.

    Rows carry explicit timestamps because an inner join may drop interior
    hours; consumers that need contiguity must check hour spacing.
    """

    hours: np.ndarray     # int64 epoch seconds per row
    kw: np.ndarray        # float64 consumption, gap-free
    weather: WeatherTable
    dropped_hours: int = 0

    def __post_init__(self):
        if not (len(self.hours) == len(self.kw) == len(self.weather)):
            raise DataError("aligned arrays must have equal length")
        if np.isnan(self.kw).any():
            raise DataError("aligned consumption must be gap-free")

    def __len__(self):
        return len(self.hours)

    @property
    def span(self):
        return int(self.hours[0]), int(self.hours[-1]) + HOUR


STEP_OF_FORMAT = {"per_minute": 60, "per_quarter_hour": 900, "hourly": HOUR}

DATASET_FORMAT_VERSION = 1


def dataset_to_json(d: AlignedDataset) -> str:
    """Canonical on-disk form of an aligned dataset."""
    doc = {
        "format_version": DATASET_FORMAT_VERSION,
        "hours": [int(h) for h in d.hours],
        "kw": [float(v) for v in d.kw],
        "summary": list(d.weather.summary),
        "icon": list(d.weather.icon),
        "numeric": [[None if math.isnan(v) else float(v) for v in row]
                    for row in d.weather.numeric],
        "dropped_hours": d.dropped_hours,
    }
    return json.dumps(doc, sort_keys=True)


def dataset_from_json(text: str) -> AlignedDataset:
    doc = json.loads(text)
    if doc.get("format_version") != DATASET_FORMAT_VERSION:
        raise DataError(f"unsupported dataset version {doc.get('format_version')}")
    numeric = np.asarray([[np.nan if v is None else v for v in row]
                          for row in doc["numeric"]], dtype=np.float64)
    weather = WeatherTable(times=np.asarray(doc["hours"], dtype=np.int64),
                           summary=tuple(doc["summary"]),
                           icon=tuple(doc["icon"]),
                           numeric=numeric)
    return AlignedDataset(hours=np.asarray(doc["hours"], dtype=np.int64),
                          kw=np.asarray(doc["kw"], dtype=np.float64),
                          weather=weather,
                          dropped_hours=doc.get("dropped_hours", 0))


def load_consumption(path, fmt: str = "per_minute",
                     utc_offset_hours: float = DEFAULT_UTC_OFFSET_HOURS,
                     report: IngestReport | None = None) -> TimeSeries:
    """Load a two-column ``timestamp,power_kW`` CSV at its native resolution.

    Malformed rows are counted and skipped (>50% malformed is a hard error);
    negative readings become gaps.
    """
    if fmt not in STEP_OF_FORMAT:
        raise DataError(f"unknown consumption format {fmt!r}")
    step = STEP_OF_FORMAT[fmt]
    rows: list[tuple[int, float]] = []
    bad = 0
    total = 0
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for line in csv.reader(fh):
            if not line or not "".join(line).strip():
                continue
            total += 1
            try:
                ts = parse_timestamp(line[0], utc_offset_hours)
                power = float(line[1])
            except (ValueError, IndexError):
                # header line or junk
                bad += 1
                continue
            rows.append((ts, power))
    if report is not None:
        report.rows_parsed += len(rows)
        report.rows_malformed += bad
    if not rows:
        raise DataError(f"{path}: no parseable rows")
    if bad > total / 2:
        raise DataError(f"{path}: {bad}/{total} rows malformed")
    rows.sort(key=lambda r: r[0])
    start = rows[0][0] - rows[0][0] % step
    n = (rows[-1][0] - start) // step + 1
    values = np.full(n, np.nan)
    negatives = 0
    for ts, power in rows:
        i = (ts - start) // step
        if power < 0:
            negatives += 1
            continue
        values[i] = power
    if report is not None:
        report.negatives_dropped += negatives
    return TimeSeries(start=int(start), step=step, values=values)


def resample_hourly(s: TimeSeries) -> TimeSeries:
    """Mean of present sub-hour values per hour; an all-absent hour is a gap."""
    if HOUR % s.step != 0:
        raise DataError(f"step {s.step}s does not divide one hour")
    if s.step == HOUR:
        return s
    per = HOUR // s.step
    # pad to whole hours aligned to the hour boundary
    lead = (s.start % HOUR) // s.step
    start = s.start - lead * s.step
    padded = np.concatenate([np.full(lead, np.nan), s.values])
    tail = (-len(padded)) % per
    padded = np.concatenate([padded, np.full(tail, np.nan)])
    blocks = padded.reshape(-1, per)
    with np.errstate(invalid="ignore"):
        sums = np.nansum(blocks, axis=1)
        counts = np.sum(~np.isnan(blocks), axis=1)
        hourly = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return TimeSeries(start=int(start), step=HOUR, values=hourly)


def aggregate(series: list[TimeSeries]) -> TimeSeries:
    """Pointwise sum; a slot is a gap iff any constituent has a gap there."""
    if not series:
        raise DataError("nothing to aggregate")
    first = series[0]
    for s in series[1:]:
        if s.start != first.start or s.step != first.step or len(s) != len(first):
            raise DataError("aggregate inputs must share start/step/length")
    stacked = np.stack([s.values for s in series])
    total = stacked.sum(axis=0)   # NaN propagates through any gap
    return TimeSeries(start=first.start, step=first.step, values=total)


def fill_gaps(s: TimeSeries, max_run: int = 3) -> TimeSeries:
    """Linearly interpolate interior gap runs of length <= max_run."""
    values = s.values.copy()
    n = len(values)
    i = 0
    while i < n:
        if not math.isnan(values[i]):
            i += 1
            continue
        j = i
        while j < n and math.isnan(values[j]):
            j += 1
        run = j - i
        if run <= max_run and i > 0 and j < n:
            left, right = values[i - 1], values[j]
            for k in range(run):
                frac = (k + 1) / (run + 1)
                values[i + k] = left + frac * (right - left)
        i = j
    return replace(s, values=values)


def load_weather(path) -> WeatherTable:
    """Load the hourly weather CSV; the exact header row is required."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in WEATHER_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing weather columns {missing}")
        times, summary, icon, numeric = [], [], [], []
        for row in reader:
            times.append(parse_timestamp(row["time"]))
            summary.append(row["summary"].strip())
            icon.append(row["icon"].strip())
            vals = []
            for col in WEATHER_NUMERIC_COLUMNS:
                raw = (row[col] or "").strip()
                try:
                    vals.append(float(raw))
                except ValueError:
                    vals.append(np.nan)
            numeric.append(vals)
    if not times:
        raise DataError(f"{path}: empty weather file")
    order = np.argsort(times)
    return WeatherTable(
        times=np.asarray(times, dtype=np.int64)[order],
        summary=tuple(summary[i] for i in order),
        icon=tuple(icon[i] for i in order),
        numeric=np.asarray(numeric)[order],
    )


def align(c: TimeSeries, w: WeatherTable) -> AlignedDataset:
    """Inner join of hourly consumption with weather rows on the hour."""
    if c.step != HOUR:
        raise DataError("align expects hourly consumption")
    cons_hours = c.timestamps
    present = ~np.isnan(c.values)
    common, ci, wi = np.intersect1d(cons_hours[present], w.times,
                                    return_indices=True)
    if len(common) == 0:
        raise DataError("consumption and weather spans do not overlap")
    cons_idx = np.nonzero(present)[0][ci]
    dropped = (len(cons_hours) - len(common)) + (len(w.times) - len(common))
    weather = WeatherTable(
        times=w.times[wi],
        summary=tuple(w.summary[i] for i in wi),
        icon=tuple(w.icon[i] for i in wi),
        numeric=w.numeric[wi],
    )
    return AlignedDataset(hours=common.astype(np.int64),
                          kw=c.values[cons_idx],
                          weather=weather,
                          dropped_hours=int(dropped))
