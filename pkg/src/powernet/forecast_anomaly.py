"""Multi-horizon forecasting and theft-anomaly detection.

Recursive forecasting feeds earlier predictions back into the history
window (error accumulates); actual-history mode predicts each hour from the
true past. The anomaly side simulates multiplicative under-reporting and
flags deviations between reported and predicted consumption, at consumer
level and at substation level via the technical-loss balance
master = sum(consumers) + TL.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .dataio import HOUR, AlignedDataset, TimeSeries
from .features import FeatureSpec, calendar_features, weather_features
from .metrics import ErrorCurve, error_curve, mape, mse
from .model import PowerNetParams, forward_batch
from .training import TrainConfig, train


class ForecastError(ValueError):
    pass


@dataclass
class ForecastReport:
    mode: str                 # "recursive" or "actual_history"
    horizon: int
    predictions: np.ndarray   # kW, clamped >= 0
    actuals: np.ndarray       # kW
    curves: ErrorCurve
    start_ts: int = 0

    def to_json(self) -> str:
        doc = {
            "mode": self.mode,
            "horizon": self.horizon,
            "start_ts": self.start_ts,
            "predictions": [repr(float(v)) for v in self.predictions],
            "actuals": [repr(float(v)) for v in self.actuals],
            "mse": mse(self.actuals, self.predictions),
            "mape": mape(self.actuals, self.predictions),
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["hour", "actual_kw", "predicted_kw"])
            for h, (a, p) in enumerate(zip(self.actuals, self.predictions), 1):
                writer.writerow([h, repr(float(a)), repr(float(p))])


def _check_contiguous(hours: np.ndarray, lo: int, hi: int):
    if hours[hi - 1] - hours[lo] != (hi - 1 - lo) * HOUR:
        raise ForecastError(f"rows {lo}..{hi} are not a contiguous hourly span")


def _predict_one(p: PowerNetParams, window_norm, fw, fc) -> float:
    yhat, _ = forward_batch(np.asarray(window_norm)[None, :],
                            np.asarray(fw)[None, :], np.asarray(fc)[None, :], p)
    return float(yhat[0])


def forecast_recursive(p: PowerNetParams, spec: FeatureSpec,
                       d: AlignedDataset, start_row: int,
                       horizon: int) -> ForecastReport:
    """Forecast ``horizon`` hours from start_row, feeding predictions back
    as history; weather features come from the recorded future rows
    (perfect weather foresight), calendar from the target timestamps."""
    n = spec.window_len
    if start_row < n:
        raise ForecastError("history does not cover one window")
    if start_row + horizon > len(d):
        raise ForecastError("future weather does not cover the horizon")
    _check_contiguous(d.hours, start_row - n, start_row + horizon)
    history = list(spec.normalize_kw(d.kw[start_row - n:start_row]))
    preds = np.empty(horizon)
    for h in range(horizon):
        row = start_row + h
        fw = weather_features(d.weather.row(row), spec)
        fc = calendar_features(int(d.hours[row]), spec)
        yhat_norm = _predict_one(p, history[-n:], fw, fc)
        kw = max(float(spec.denormalize_kw(yhat_norm)), 0.0)
        preds[h] = kw
        history.append(float(spec.normalize_kw(kw)))
    actuals = d.kw[start_row:start_row + horizon]
    return ForecastReport(mode="recursive", horizon=horizon, predictions=preds,
                          actuals=actuals.copy(),
                          curves=error_curve(actuals, preds),
                          start_ts=int(d.hours[start_row]))


def forecast_with_actuals(p: PowerNetParams, spec: FeatureSpec,
                          d: AlignedDataset, start_row: int,
                          horizon: int) -> ForecastReport:
    """One-step-ahead prediction for each hour in the range, always using
    the true history (no error accumulation)."""
    n = spec.window_len
    if start_row < n:
        raise ForecastError("history does not cover one window")
    if start_row + horizon > len(d):
        raise ForecastError("range exceeds the dataset")
    _check_contiguous(d.hours, start_row - n, start_row + horizon)
    rows = np.arange(start_row, start_row + horizon)
    E = np.stack([spec.normalize_kw(d.kw[r - n:r]) for r in rows])
    FW = np.stack([weather_features(d.weather.row(int(r)), spec) for r in rows])
    FC = np.stack([calendar_features(int(d.hours[r]), spec) for r in rows])
    yhat, _ = forward_batch(E, FW, FC, p)
    preds = np.maximum(spec.denormalize_kw(yhat), 0.0)
    actuals = d.kw[rows]
    return ForecastReport(mode="actual_history", horizon=horizon,
                          predictions=preds, actuals=actuals.copy(),
                          curves=error_curve(actuals, preds),
                          start_ts=int(d.hours[start_row]))


def retraining_analysis(report: ForecastReport, thresholds) -> list:
    """Hours at which the cumulative MAPE first crosses each threshold.

    Returns [{"threshold_pct", "crossing_hour"}]; crossing_hour is None when
    the curve never reaches the threshold.
    """
    curve = report.curves.cum_mape
    out = []
    for thr in thresholds:
        above = np.nonzero(curve >= thr)[0]
        out.append({"threshold_pct": float(thr),
                    "crossing_hour": int(above[0] + 1) if len(above) else None})
    return out


# theft simulation and detection --------------------------------------------

@dataclass
class TheftScenario:
    """Multiplicative under-reporting: reported = actual * (1 - theta)
    within [start_row, end_row)."""

    theta: float
    start_row: int
    end_row: int

    def __post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise ForecastError("theta must be in [0, 1)")
        if self.end_row < self.start_row:
            raise ForecastError("empty-backwards theft range")


def apply_theft(values, scenario: TheftScenario):
    """Tamper a kW series (TimeSeries or array); exact outside the range."""
    if isinstance(values, TimeSeries):
        out = apply_theft(values.values, scenario)
        return TimeSeries(start=values.start, step=values.step, values=out)
    out = np.asarray(values, dtype=np.float64).copy()
    if scenario.end_row > len(out):
        raise ForecastError("theft range exceeds the series")
    out[scenario.start_row:scenario.end_row] *= (1.0 - scenario.theta)
    return out


def theft_sweep(p: PowerNetParams, spec: FeatureSpec, d: AlignedDataset,
                start_row: int, horizon: int, thetas) -> list:
    """MAPE of clean-feature predictions against tampered reported values,
    one row per theft fraction. Per the error definition the reported
    (tampered) series plays the role of the actuals."""
    clean = forecast_with_actuals(p, spec, d, start_row, horizon)
    rows = []
    for theta in thetas:
        scenario = TheftScenario(theta=float(theta), start_row=0, end_row=horizon)
        reported = apply_theft(clean.actuals, scenario)
        rows.append({"theta": float(theta),
                     "mape": mape(reported, clean.predictions)})
    return rows


@dataclass
class DetectorConfig:
    window: int = 24          # hours per rolling residual window
    k: float = 3.0            # alarm at mu + k*sigma of clean window means
    floor_kw: float = 0.05    # denominator floor; reported values are adversarial

    def __post_init__(self):
        if self.window < 1 or self.k <= 0:
            raise ForecastError("window must be >= 1 and k > 0")


@dataclass
class ResidualStats:
    mu: float
    sigma: float

    def threshold(self, k: float) -> float:
        return self.mu + k * self.sigma


def _residual_pct(predicted, reported, floor_kw):
    predicted = np.asarray(predicted, dtype=np.float64)
    reported = np.asarray(reported, dtype=np.float64)
    return np.abs(reported - predicted) / np.maximum(predicted, floor_kw)


def _window_means(x, window):
    if len(x) < window:
        raise ForecastError(f"need at least {window} hours, have {len(x)}")
    c = np.concatenate([[0.0], np.cumsum(x)])
    return (c[window:] - c[:-window]) / window


def residual_stats(predicted, reported, cfg: DetectorConfig) -> ResidualStats:
    """Mean/stddev of rolling-window residual percentages on clean data."""
    means = _window_means(_residual_pct(predicted, reported, cfg.floor_kw),
                          cfg.window)
    return ResidualStats(mu=float(means.mean()), sigma=float(means.std()))


def detect_consumer(predicted, reported, cfg: DetectorConfig,
                    stats: ResidualStats) -> list:
    """Alarms [{hour, residual_pct}] where the rolling residual window mean
    exceeds the clean-data threshold. ``hour`` indexes the window end."""
    means = _window_means(_residual_pct(predicted, reported, cfg.floor_kw),
                          cfg.window)
    thr = stats.threshold(cfg.k)
    return [{"hour": int(i + cfg.window - 1), "residual_pct": float(v)}
            for i, v in enumerate(means) if v > thr]


def simulate_substation(consumers: list, tl_fraction: float = 0.05,
                        noise_frac: float = 0.005, seed: int = 0) -> np.ndarray:
    """Master-meter series with technical loss: master = sum(consumers) + TL,
    TL = tl_fraction * master plus zero-mean noise."""
    total = np.sum([np.asarray(c, dtype=np.float64) for c in consumers], axis=0)
    master = total / (1.0 - tl_fraction)
    rng = np.random.default_rng(seed)
    return master * (1.0 + rng.normal(0, noise_frac, len(master)))


def observed_tl(master, reported: list) -> np.ndarray:
    """TL as seen by the substation: master minus the sum of reports."""
    return (np.asarray(master, dtype=np.float64)
            - np.sum([np.asarray(r, dtype=np.float64) for r in reported], axis=0))


def detect_substation(master, reported: list, tl_predictions,
                      cfg: DetectorConfig, stats: ResidualStats) -> list:
    """Region-level alarms from the deviation between observed and predicted
    technical loss; no consumer attribution."""
    master = np.asarray(master, dtype=np.float64)
    lengths = {len(master)} | {len(r) for r in reported} | {len(tl_predictions)}
    if len(lengths) != 1:
        raise ForecastError(f"misaligned substation inputs: lengths {sorted(lengths)}")
    tl_o = observed_tl(master, reported)
    return detect_consumer(tl_predictions, tl_o, cfg, stats)


def seasonal_tl_predictor(tl_history, horizon: int, period: int = 24) -> np.ndarray:
    """Simple technical-loss model: repeat the final clean period."""
    tl_history = np.asarray(tl_history, dtype=np.float64)
    if len(tl_history) < period:
        raise ForecastError("TL history shorter than one period")
    last = tl_history[-period:]
    return np.array([last[h % period] for h in range(horizon)])


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "mape"])
        for row in rows:
            writer.writerow([repr(row["theta"]), repr(row["mape"])])
