"""Feature engineering: ACF window selection, weather/calendar vectors,
and assembly of supervised examples from an aligned dataset.

The feature layout per example is the consumption window (length n, z-scored
with training stats), a 13-entry weather vector and a 5-entry calendar
vector. Normalization statistics and categorical vocabularies come from the
training split only.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .dataio import (
    HOUR,
    DEFAULT_UTC_OFFSET_HOURS,
    AlignedDataset,
    WEATHER_NUMERIC_COLUMNS,
)

N_WEATHER = 13
N_CALENDAR = 5

SPEC_FORMAT_VERSION = 1


class FeatureError(ValueError):
    pass


def acf(x, max_lag: int) -> np.ndarray:
    """Autocorrelations r_1..r_max_lag of a gap-free series.

    r_k = sum_t (x_t - mean)(x_{t+k} - mean) / sum_t (x_t - mean)^2.
    """
    x = np.asarray(x, dtype=np.float64)
    if max_lag < 1 or len(x) <= max_lag:
        raise FeatureError("need length > max_lag >= 1")
    if np.isnan(x).any():
        raise FeatureError("acf input must be gap-free")
    centered = x - x.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        raise FeatureError("acf undefined for a constant series")
    out = np.empty(max_lag)
    for k in range(1, max_lag + 1):
        out[k - 1] = float(centered[:-k] @ centered[k:]) / denom
    return out


def select_window(acf_values, threshold: float = 0.5) -> int:
    """Length of the contiguous prefix of lags with r >= threshold.

    Falls back to 1 (with a warning) when even lag 1 is below threshold.
    """
    if not 0.0 < threshold < 1.0:
        raise FeatureError("threshold must be in (0,1)")
    r = np.asarray(acf_values, dtype=np.float64)
    n = 0
    for value in r:
        if value >= threshold:
            n += 1
        else:
            break
    if n == 0:
        warnings.warn("lag-1 autocorrelation below threshold; window forced to 1")
        return 1
    return n


@dataclass
class FeatureSpec:
    """Frozen feature configuration: window length, vocabularies, stats."""

    window_len: int
    summary_vocab: dict = field(default_factory=dict)   # text -> index >= 1, 0 is OOV
    icon_vocab: dict = field(default_factory=dict)
    weather_mean: np.ndarray = None
    weather_std: np.ndarray = None
    cons_mean: float = 0.0
    cons_std: float = 1.0
    daytime_range: tuple = (7, 19)
    utc_offset_hours: float = DEFAULT_UTC_OFFSET_HOURS

    def normalize_kw(self, v):
        return (np.asarray(v, dtype=np.float64) - self.cons_mean) / self.cons_std

    def denormalize_kw(self, v):
        return np.asarray(v, dtype=np.float64) * self.cons_std + self.cons_mean

    def to_json(self) -> str:
        doc = {
            "format_version": SPEC_FORMAT_VERSION,
            "window_len": self.window_len,
            "summary_vocab": self.summary_vocab,
            "icon_vocab": self.icon_vocab,
            "weather_mean": list(self.weather_mean),
            "weather_std": list(self.weather_std),
            "cons_mean": self.cons_mean,
            "cons_std": self.cons_std,
            "daytime_range": list(self.daytime_range),
            "utc_offset_hours": self.utc_offset_hours,
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FeatureSpec":
        doc = json.loads(text)
        if doc.get("format_version") != SPEC_FORMAT_VERSION:
            raise FeatureError(f"unsupported FeatureSpec version {doc.get('format_version')}")
        return cls(
            window_len=doc["window_len"],
            summary_vocab=doc["summary_vocab"],
            icon_vocab=doc["icon_vocab"],
            weather_mean=np.asarray(doc["weather_mean"]),
            weather_std=np.asarray(doc["weather_std"]),
            cons_mean=doc["cons_mean"],
            cons_std=doc["cons_std"],
            daytime_range=tuple(doc["daytime_range"]),
            utc_offset_hours=doc["utc_offset_hours"],
        )


def calendar_features(t: int, spec: FeatureSpec) -> np.ndarray:
    """[day_of_month, day_of_week (Mon=0), hour, in_daytime, is_weekend]."""
    local = datetime.fromtimestamp(
        t, timezone(timedelta(hours=spec.utc_offset_hours)))
    lo, hi = spec.daytime_range
    return np.array([
        float(local.day),
        float(local.weekday()),
        float(local.hour),
        1.0 if lo <= local.hour < hi else 0.0,
        1.0 if local.weekday() >= 5 else 0.0,
    ])


def weather_features(row, spec: FeatureSpec) -> np.ndarray:
    """13-vector: [summary_idx, icon_idx, 11 z-scored numeric fields].

    Unseen categories map to index 0; missing numerics become the training
    mean (z-score 0).
    """
    summary, icon, numeric = row
    z = (np.asarray(numeric, dtype=np.float64) - spec.weather_mean) / spec.weather_std
    z = np.where(np.isnan(z), 0.0, z)
    return np.concatenate([
        [float(spec.summary_vocab.get(summary, 0)),
         float(spec.icon_vocab.get(icon, 0))],
        z,
    ])


def fit_feature_spec(d: AlignedDataset, train_slice: slice,
                     window_len: int | None = None,
                     acf_threshold: float = 0.5, max_lag: int = 48,
                     daytime_range=(7, 19),
                     utc_offset_hours: float = DEFAULT_UTC_OFFSET_HOURS) -> FeatureSpec:
    """Build a FeatureSpec from the training rows of an aligned dataset.

    When window_len is None the ACF prefix rule picks it from the training
    consumption.
    """
    kw = d.kw[train_slice]
    if len(kw) == 0:
        raise FeatureError("empty training slice")
    if window_len is None:
        window_len = select_window(acf(kw, min(max_lag, len(kw) - 1)), acf_threshold)

    numeric = d.weather.numeric[train_slice]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(numeric, axis=0)
        std = np.nanstd(numeric, axis=0)
    mean = np.where(np.isnan(mean), 0.0, mean)
    # constant features pass through as 0 after centering
    std = np.where((std == 0) | np.isnan(std), 1.0, std)

    def build_vocab(values):
        vocab = {}
        for v in values:
            if v and v not in vocab:
                vocab[v] = len(vocab) + 1
        return vocab

    idx = range(*train_slice.indices(len(d)))
    cons_std = float(kw.std())
    return FeatureSpec(
        window_len=int(window_len),
        summary_vocab=build_vocab(d.weather.summary[i] for i in idx),
        icon_vocab=build_vocab(d.weather.icon[i] for i in idx),
        weather_mean=mean,
        weather_std=std,
        cons_mean=float(kw.mean()),
        cons_std=cons_std if cons_std > 0 else 1.0,
        daytime_range=tuple(daytime_range),
        utc_offset_hours=utc_offset_hours,
    )


@dataclass
class Split:
    """Aligned example arrays for one split, in chronological order."""

    E: np.ndarray    # (N, n) normalized consumption windows
    FW: np.ndarray   # (N, 13)
    FC: np.ndarray   # (N, 5)
    y: np.ndarray    # (N,) normalized targets
    t: np.ndarray    # (N,) target epoch seconds

    def __len__(self):
        return len(self.y)


@dataclass
class ExampleSet:
    spec: FeatureSpec
    train: Split
    validation: Split
    test: Split
    skipped: int = 0


def _build_split(d: AlignedDataset, spec: FeatureSpec, lo: int, hi: int):
    """Examples for target rows in [lo, hi); windows must be contiguous."""
    n = spec.window_len
    E, FW, FC, y, t = [], [], [], [], []
    skipped = 0
    hours = d.hours
    for i in range(lo, hi):
        if i - n < 0:
            skipped += 1
            continue
        # window rows i-n .. i-1 plus target i must be consecutive hours
        if hours[i] - hours[i - n] != n * HOUR:
            skipped += 1
            continue
        E.append(spec.normalize_kw(d.kw[i - n:i]))
        FW.append(weather_features(d.weather.row(i), spec))
        FC.append(calendar_features(int(hours[i]), spec))
        y.append(float(spec.normalize_kw(d.kw[i])))
        t.append(int(hours[i]))
    shape_e = (len(E), n)
    split = Split(
        E=np.asarray(E).reshape(shape_e),
        FW=np.asarray(FW).reshape(len(E), N_WEATHER),
        FC=np.asarray(FC).reshape(len(E), N_CALENDAR),
        y=np.asarray(y, dtype=np.float64),
        t=np.asarray(t, dtype=np.int64),
    )
    return split, skipped


def build_examples(d: AlignedDataset, spec: FeatureSpec,
                   splits: tuple) -> ExampleSet:
    """Assemble train/validation/test examples from row-index boundaries.

    ``splits`` is ((train_lo, train_hi), (val_lo, val_hi), (test_lo, test_hi))
    in dataset row indices, chronological and non-overlapping. Targets whose
    history window crosses a non-contiguous stretch are skipped and counted.
    """
    (a0, a1), (b0, b1), (c0, c1) = splits
    if not (a0 < a1 <= b0 < b1 <= c0 < c1 <= len(d)):
        raise FeatureError(f"splits must be chronological and non-overlapping, got {splits}")
    train, s1 = _build_split(d, spec, a0, a1)
    val, s2 = _build_split(d, spec, b0, b1)
    test, s3 = _build_split(d, spec, c0, c1)
    if len(train) == 0 or len(val) == 0 or len(test) == 0:
        raise FeatureError("a split produced no examples")
    return ExampleSet(spec=spec, train=train, validation=val, test=test,
                      skipped=s1 + s2 + s3)


def tail_splits(total_rows: int, train_hours: int = 624,
                val_hours: int = 48, test_hours: int = 48) -> tuple:
    """Row boundaries for the train/validation/test protocol, counted from
    the end of the dataset so earlier rows serve as window history."""
    need = train_hours + val_hours + test_hours
    if total_rows < need:
        raise FeatureError(f"need {need} rows, have {total_rows}")
    c1 = total_rows
    c0 = c1 - test_hours
    b0 = c0 - val_hours
    a0 = b0 - train_hours
    return (a0, b0), (b0, c0), (c0, c1)
