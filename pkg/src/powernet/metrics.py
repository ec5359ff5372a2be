"""Forecast error metrics (MSE, MAPE) and cumulative/rolling error curves.

Metrics are computed on denormalized kW values; MAPE excludes hours whose
actual value is at or below a small floor instead of dividing by zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    pass


def _pair(actual, forecast):
    a = np.asarray(actual, dtype=np.float64)
    f = np.asarray(forecast, dtype=np.float64)
    if a.shape != f.shape or a.ndim != 1 or len(a) == 0:
        raise MetricError(f"need equal-length non-empty vectors, got {a.shape} and {f.shape}")
    return a, f


def mse(actual, forecast) -> float:
    """Mean squared error (1/n) sum (A_t - F_t)^2."""
    a, f = _pair(actual, forecast)
    return float(np.mean((a - f) ** 2))


def mape(actual, forecast, zero_floor: float = 1e-6) -> float:
    """Mean absolute percentage error, in percent.

    Terms with |A_t| <= zero_floor are excluded and the mean renormalized;
    if nothing remains the statistic is undefined.
    """
    if zero_floor < 0:
        raise MetricError("zero_floor must be >= 0")
    a, f = _pair(actual, forecast)
    keep = np.abs(a) > zero_floor
    if not keep.any():
        raise MetricError("all actual values at or below the zero floor")
    return float(100.0 * np.mean(np.abs((a[keep] - f[keep]) / a[keep])))


@dataclass
class ErrorCurve:
    """Per-hour cumulative and rolling error series."""

    hours: np.ndarray      # 1-based elapsed/lead hours
    cum_mape: np.ndarray
    cum_mse: np.ndarray
    roll_mape: np.ndarray
    roll_mse: np.ndarray
    window: int

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["hour", "cum_mape", "cum_mse", "roll_mape", "roll_mse"])
            for row in zip(self.hours, self.cum_mape, self.cum_mse,
                           self.roll_mape, self.roll_mse):
                writer.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])


def error_curve(actual, forecast, window: int = 24,
                zero_floor: float = 1e-6) -> ErrorCurve:
    """Cumulative-to-hour and rolling-window MAPE/MSE series."""
    if window < 1:
        raise MetricError("window must be >= 1")
    a, f = _pair(actual, forecast)
    n = len(a)
    sq = (a - f) ** 2
    keep = np.abs(a) > zero_floor
    pct = np.zeros(n)
    pct[keep] = 100.0 * np.abs((a[keep] - f[keep]) / a[keep])

    cum_mse = np.cumsum(sq) / np.arange(1, n + 1)
    cum_kept = np.cumsum(keep)
    cum_mape = np.where(cum_kept > 0, np.cumsum(pct) / np.maximum(cum_kept, 1), np.nan)

    roll_mape = np.empty(n)
    roll_mse = np.empty(n)
    for i in range(n):
        lo = max(0, i - window + 1)
        roll_mse[i] = sq[lo:i + 1].mean()
        k = keep[lo:i + 1]
        roll_mape[i] = pct[lo:i + 1][k].mean() if k.any() else np.nan
    return ErrorCurve(hours=np.arange(1, n + 1), cum_mape=cum_mape,
                      cum_mse=cum_mse, roll_mape=roll_mape, roll_mse=roll_mse,
                      window=window)
