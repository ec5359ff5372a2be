"""Command-line surface: ingest, train, grid-search, evaluate, forecast,
anomaly, synth.

Exit codes: 0 success, 1 internal error, 2 usage/input error. All outputs
are deterministic for a fixed config and seed, and safe to overwrite.
The default output directory can be set via the POWERNET_OUT environment
variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import baselines, dataio, synth
from .dataio import DataError
from .features import (FeatureError, FeatureSpec, build_examples,
                       fit_feature_spec, tail_splits)
from .forecast_anomaly import (DetectorConfig, ForecastError,
                               detect_consumer, forecast_recursive,
                               forecast_with_actuals, residual_stats,
                               retraining_analysis, theft_sweep,
                               write_sweep_csv)
from .metrics import MetricError, mape, mse
from .model import checkpoint_from_json, checkpoint_to_json, forward_batch
from .training import TrainConfig, TrainingError, grid_search, train

USAGE_ERROR = 2
INTERNAL_ERROR = 1

CONFIG_KEYS = {
    "learning_rate", "batch_size", "max_epochs", "patience", "dropout_rate",
    "l2_lambda", "memory_size_grid", "memory_size", "d1", "d2", "d3",
    "stack", "seed", "window_len", "acf_threshold", "splits",
}


class UsageError(ValueError):
    pass


def _out_dir(args) -> str:
    out = args.out or os.environ.get("POWERNET_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _load_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            doc = json.load(fh)
        unknown = set(doc) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(doc)
    # flags take precedence over file values
    for key in ("seed", "memory_size", "window_len", "max_epochs", "splits",
                "patience", "learning_rate", "dropout_rate", "l2_lambda"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _parse_splits(text: str):
    try:
        train_h, val_h, test_h = (int(x) for x in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"bad --splits {text!r}, expected TRAIN:VAL:TEST") from exc
    return train_h, val_h, test_h


def _load_dataset(path):
    try:
        with open(path) as fh:
            return dataio.dataset_from_json(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read dataset {path}: {exc}") from exc


def _prepare_examples(d, cfg: dict):
    split_hours = _parse_splits(cfg.get("splits", "624:48:48"))
    bounds = tail_splits(len(d), *split_hours)
    spec = fit_feature_spec(d, slice(*bounds[0]),
                            window_len=cfg.get("window_len"),
                            acf_threshold=cfg.get("acf_threshold", 0.5))
    return build_examples(d, spec, bounds), bounds


def _train_config(cfg: dict) -> TrainConfig:
    fields = {k: v for k, v in cfg.items()
              if k in TrainConfig.__dataclass_fields__}
    if "memory_size_grid" in fields:
        fields["memory_size_grid"] = tuple(fields["memory_size_grid"])
    return TrainConfig(**fields)


def cmd_synth(args):
    out = _out_dir(args)
    synth.write_fixture_dir(out, days=args.days, apartments=args.apartments,
                            seed=args.seed, fmt=args.format)
    print(f"wrote {args.apartments} consumption files + weather.csv to {out}")
    return 0


def cmd_ingest(args):
    for path in list(args.consumption) + [args.weather]:
        if not os.path.exists(path):
            raise UsageError(f"input file not found: {path}")
    report = dataio.IngestReport()
    series = [dataio.resample_hourly(
                  dataio.load_consumption(p, args.format, report=report))
              for p in args.consumption]
    hourly = dataio.aggregate(series) if args.aggregate else series[0]
    if not args.aggregate and len(series) > 1:
        raise UsageError("multiple consumption files require --aggregate")
    hourly = dataio.fill_gaps(hourly, max_run=args.fill_max_run)
    weather = dataio.load_weather(args.weather)
    aligned = dataio.align(hourly, weather)
    out = _out_dir(args)
    _write(os.path.join(out, "dataset.json"), dataio.dataset_to_json(aligned))
    ingest_doc = {
        "rows_parsed": report.rows_parsed,
        "rows_malformed": report.rows_malformed,
        "negatives_dropped": report.negatives_dropped,
        "aligned_hours": len(aligned),
        "dropped_hours": aligned.dropped_hours,
        "remaining_gaps": 0,
    }
    _write(os.path.join(out, "ingest_report.json"),
           json.dumps(ingest_doc, indent=1, sort_keys=True))
    print(f"aligned {len(aligned)} hours -> {out}/dataset.json")
    return 0


def _train_common(args, use_grid: bool):
    d = _load_dataset(args.dataset)
    cfg = _load_config(args)
    data, bounds = _prepare_examples(d, cfg)
    out = _out_dir(args)
    if args.model == "gbt":
        if use_grid:
            model, report = baselines.gbt_grid_search(data)
        else:
            model = baselines.fit_gbt_examples(data)
            report = []
        doc = json.loads(model.to_json())
        doc["feature_spec"] = json.loads(data.spec.to_json())
        doc["splits"] = [list(b) for b in bounds]
        _write(os.path.join(out, "checkpoint.json"),
               json.dumps(doc, indent=1, sort_keys=True))
        _write(os.path.join(out, "report.json"),
               json.dumps(report, indent=1, sort_keys=True))
        print(f"gbt model written to {out}/checkpoint.json")
        return 0
    tcfg = _train_config(cfg)
    if use_grid:
        params, report, cell_reports = grid_search(data, tcfg)
        _write(os.path.join(out, "grid_report.json"), json.dumps(
            {str(m): (None if r is None else json.loads(r.to_json()))
             for m, r in cell_reports.items()}, indent=1, sort_keys=True))
        memory_size = report.memory_size
    else:
        memory_size = tcfg.memory_size
        params, report = train(data, tcfg)
    hyper = {"memory_size": memory_size, "d1": params.w1.shape[0],
             "d2": params.w2.shape[0], "d3": params.w3.shape[0],
             "stack": len(params.lstm),
             "splits": [list(b) for b in bounds]}
    _write(os.path.join(out, "checkpoint.json"),
           checkpoint_to_json(params, hyper, data.spec.to_json(), cfg.get("seed", 0)))
    _write(os.path.join(out, "report.json"), report.to_json())
    report.write_curves_csv(os.path.join(out, "curves.csv"))
    print(f"best val MSE {report.best_val_mse:.6g} (epoch {report.best_epoch}) "
          f"-> {out}/checkpoint.json")
    return 0


def cmd_train(args):
    return _train_common(args, use_grid=False)


def cmd_grid_search(args):
    return _train_common(args, use_grid=True)


def _load_checkpoint(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read checkpoint {path}: {exc}") from exc
    spec = FeatureSpec.from_json(json.dumps(doc["feature_spec"]))
    if doc.get("model_type") == "gbt":
        model = baselines.GbtModel.from_json(json.dumps(doc))
        return "gbt", model, spec, doc
    with open(path) as fh:
        params, hyper, _, _ = checkpoint_from_json(fh.read())
    return "powernet", params, spec, doc


def _split_predictions(kind, model, spec, data, split_name):
    split = getattr(data, split_name)
    if kind == "gbt":
        pred = model.predict(baselines.flatten_features(split))
    else:
        pred, _ = forward_batch(split.E, split.FW, split.FC, model)
    return (spec.denormalize_kw(split.y), np.maximum(spec.denormalize_kw(pred), 0.0))


def cmd_evaluate(args):
    kind, model, spec, doc = _load_checkpoint(args.checkpoint)
    d = _load_dataset(args.dataset)
    splits = doc.get("splits") or doc.get("hyperparameters", {}).get("splits")
    if splits is None:
        raise UsageError("checkpoint does not record split boundaries")
    bounds = tuple(tuple(b) for b in splits)
    data = build_examples(d, spec, bounds)
    actual, pred = _split_predictions(kind, model, spec, data, args.split)
    out = _out_dir(args)
    doc = {"split": args.split, "mse": mse(actual, pred),
           "mape": mape(actual, pred), "n": len(actual)}
    _write(os.path.join(out, f"evaluate_{args.split}.json"),
           json.dumps(doc, indent=1, sort_keys=True))
    print(f"{args.split}: MSE {doc['mse']:.6g}  MAPE {doc['mape']:.3f}%")
    return 0


def cmd_forecast(args):
    kind, model, spec, _ = _load_checkpoint(args.checkpoint)
    if kind != "powernet":
        raise UsageError("forecast requires a powernet checkpoint")
    d = _load_dataset(args.dataset)
    start_row = args.start_row if args.start_row is not None else len(d) - args.horizon
    fn = forecast_recursive if args.mode == "recursive" else forecast_with_actuals
    report = fn(model, spec, d, start_row, args.horizon)
    out = _out_dir(args)
    report.write_csv(os.path.join(out, f"forecast_{args.mode}.csv"))
    report.curves.write_csv(os.path.join(out, f"forecast_{args.mode}_curve.csv"))
    _write(os.path.join(out, f"forecast_{args.mode}.json"), report.to_json())
    if args.thresholds:
        table = retraining_analysis(report, args.thresholds)
        _write(os.path.join(out, "retraining.json"),
               json.dumps(table, indent=1, sort_keys=True))
    print(f"{args.mode} horizon {args.horizon}: "
          f"MAPE {mape(report.actuals, report.predictions):.3f}%")
    return 0


def cmd_anomaly(args):
    kind, model, spec, _ = _load_checkpoint(args.checkpoint)
    if kind != "powernet":
        raise UsageError("anomaly requires a powernet checkpoint")
    d = _load_dataset(args.dataset)
    horizon = args.horizon
    start_row = args.start_row if args.start_row is not None else len(d) - horizon
    rows = theft_sweep(model, spec, d, start_row, horizon, args.thetas)
    out = _out_dir(args)
    write_sweep_csv(os.path.join(out, "theft_sweep.csv"), rows)
    result = {"sweep": rows}
    if args.detect_theta is not None:
        cfg = DetectorConfig(window=args.detector_window, k=args.detector_k)
        clean = forecast_with_actuals(model, spec, d, start_row - horizon, horizon)
        stats = residual_stats(clean.predictions, clean.actuals, cfg)
        test = forecast_with_actuals(model, spec, d, start_row, horizon)
        from .forecast_anomaly import TheftScenario, apply_theft
        reported = apply_theft(test.actuals,
                               TheftScenario(args.detect_theta, 0, horizon))
        alarms = detect_consumer(test.predictions, reported, cfg, stats)
        result["detection"] = {"theta": args.detect_theta,
                               "alarms": alarms,
                               "windows": int(horizon - cfg.window + 1)}
    _write(os.path.join(out, "anomaly.json"),
           json.dumps(result, indent=1, sort_keys=True))
    print(f"theft sweep over {len(rows)} thetas -> {out}/theft_sweep.csv")
    return 0


def _thetas(text: str):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="powernet",
        description="Power-demand forecasting and theft-anomaly toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (default $POWERNET_OUT or .)")

    p = sub.add_parser("synth", help="generate a synthetic fixture directory")
    common(p)
    p.add_argument("--days", type=int, default=35)
    p.add_argument("--apartments", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["per_minute", "per_quarter_hour"],
                   default="per_quarter_hour")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ingest", help="align consumption and weather CSVs")
    common(p)
    p.add_argument("--consumption", nargs="+", required=True)
    p.add_argument("--weather", required=True)
    p.add_argument("--format", choices=sorted(dataio.STEP_OF_FORMAT),
                   default="per_quarter_hour")
    p.add_argument("--aggregate", action="store_true",
                   help="sum all consumption files into one series")
    p.add_argument("--fill-max-run", type=int, default=3)
    p.set_defaults(fn=cmd_ingest)

    def train_args(p):
        common(p)
        p.add_argument("--dataset", required=True)
        p.add_argument("--config", help="JSON config file; flags win")
        p.add_argument("--model", choices=["powernet", "gbt"], default="powernet")
        p.add_argument("--splits", help="train:val:test hours, e.g. 624:48:48")
        p.add_argument("--window-len", dest="window_len", type=int)
        p.add_argument("--memory-size", dest="memory_size", type=int)
        p.add_argument("--max-epochs", dest="max_epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--dropout-rate", dest="dropout_rate", type=float)
        p.add_argument("--l2-lambda", dest="l2_lambda", type=float)
        p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train one model")
    train_args(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("grid-search", help="train over the parameter grid")
    train_args(p)
    p.set_defaults(fn=cmd_grid_search)

    p = sub.add_parser("evaluate", help="metrics of a checkpoint on a split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=["train", "validation", "test"],
                   default="test")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("forecast", help="multi-horizon forecast")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", choices=["recursive", "actual"], default="recursive")
    p.add_argument("--horizon", type=int, default=720)
    p.add_argument("--start-row", dest="start_row", type=int)
    p.add_argument("--thresholds", type=lambda s: [float(x) for x in s.split(",")],
                   help="cumulative-MAPE thresholds for the retraining table")
    p.set_defaults(fn=cmd_forecast)

    p = sub.add_parser("anomaly", help="theft sweep and detection")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--horizon", type=int, default=336)
    p.add_argument("--start-row", dest="start_row", type=int)
    p.add_argument("--thetas", type=_thetas,
                   default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    p.add_argument("--detect-theta", dest="detect_theta", type=float)
    p.add_argument("--detector-window", dest="detector_window", type=int, default=24)
    p.add_argument("--detector-k", dest="detector_k", type=float, default=3.0)
    p.set_defaults(fn=cmd_anomaly)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, DataError, FeatureError, MetricError,
            ForecastError, baselines.BaselineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
