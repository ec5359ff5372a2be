"""Walk through the data pipeline: raw meter CSVs to model-ready examples.

Generates a small synthetic apartment complex, then runs the same steps a
real deployment would: load per-meter CSVs, resample to hourly, aggregate,
fill short gaps, align with weather, pick the history window from the ACF,
and build normalized train/validation/test examples.
"""

import tempfile

import numpy as np

from powernet.dataio import (
    aggregate, align, fill_gaps, load_consumption, load_weather,
    resample_hourly,
)
from powernet.features import acf, build_examples, fit_feature_spec, tail_splits
from powernet.synth import write_fixture_dir


def main():
    with tempfile.TemporaryDirectory() as tmp:
        print("=== 1. synthesize raw meter data ===")
        paths, weather_path = write_fixture_dir(tmp, days=32, apartments=3,
                                                seed=0, fmt="per_quarter_hour")
        print(f"wrote {len(paths)} consumption files + weather to {tmp}")

        print("\n=== 2. load, resample, aggregate ===")
        series = []
        for path in paths:
            raw = load_consumption(path, "per_quarter_hour")
            hourly = resample_hourly(raw)
            print(f"{path.split('/')[-1]}: {len(raw)} readings -> "
                  f"{len(hourly)} hourly means, {hourly.gap_count()} gaps")
            series.append(hourly)
        total = fill_gaps(aggregate(series), max_run=3)
        print(f"aggregate: {len(total)} hours, mean {np.nanmean(total.values):.2f} kW")

        print("\n=== 3. align with weather ===")
        weather = load_weather(weather_path)
        d = align(total, weather)
        print(f"aligned {len(d)} hours ({d.dropped_hours} dropped)")

        print("\n=== 4. pick the history window from the ACF ===")
        bounds = tail_splits(len(d))
        train_lo, train_hi = bounds[0]
        r = acf(d.kw[train_lo:train_hi], 48)
        print("lag :", "  ".join(f"{k + 1:4d}" for k in range(8)))
        print("acf :", "  ".join(f"{v:4.2f}" for v in r[:8]))
        spec = fit_feature_spec(d, slice(train_lo, train_hi))
        print(f"window length n = {spec.window_len} "
              f"(longest prefix with correlation above 0.5)")

        print("\n=== 5. build model-ready examples ===")
        data = build_examples(d, spec, bounds)
        print(f"train/val/test examples: {len(data.train)}/"
              f"{len(data.validation)}/{len(data.test)} ({data.skipped} skipped)")
        print(f"one example: E={np.round(data.train.E[0], 3)} "
              f"(normalized consumption window),")
        print(f"  f_w has {data.train.FW.shape[1]} weather features, "
              f"f_c = {data.train.FC[0]} (day, weekday, hour, daytime, weekend)")


if __name__ == "__main__":
    main()
