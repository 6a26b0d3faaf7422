"""``tcwvnet`` command line: train, predict, evaluate, transect, synth.

Exit codes: 0 success, 2 config/schema error, 3 I/O error,
4 numerical or insufficient-data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from contextlib import contextmanager

import numpy as np

from . import nn
from .data import TARGET, SynthConfig, ingest_csv, synth_generate, synth_grid, write_csv
from .errors import ConfigError, SchemaError, TcwvError
from .evaluate import (DEFAULT_LATITUDES, compare_transects, annual_average, compute_metrics,
                       extract_transect, feature_channels, predict_grid, read_grid_csv,
                       write_comparison_csv, write_grid_csv, write_transects_csv)
from .serialize import load_model, save_model
from .train import RunConfig, train

log = logging.getLogger("tcwvnet")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.exc = exc

    @property
    def exit_code(self) -> int:
        if isinstance(self.exc, TcwvError):
            return self.exc.exit_code
        if isinstance(self.exc, OSError):
            return EXIT_IO
        if isinstance(self.exc, (json.JSONDecodeError, ValueError, KeyError, TypeError)):
            return EXIT_CONFIG
        return 1


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (TcwvError, OSError, ValueError, KeyError, TypeError, ArithmeticError) as exc:
        raise StageError(name, exc) from exc


def _read_json(path: str) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return doc


def _write_json(obj, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    with stage("config"):
        doc = _read_json(args.config) if args.config else {}
        if args.seed is not None:
            doc["seed"] = args.seed
        config = RunConfig.from_dict(doc)
        input_path = args.input or config.input_path
        if not input_path:
            raise ConfigError("paths.input: no input CSV given (config paths.input or --input)")
        model_path = args.model or config.model_path or "model.json"
        history_path = args.history or config.history_path or "history.csv"
        metrics_path = args.metrics or config.metrics_path or "metrics.json"
    with stage("ingest"):
        table = ingest_csv(input_path, config.missing_policy)
    log.info("ingested %d rows from %s", len(table), input_path)
    with stage("train"):
        result = train(config, table)
    with stage("evaluate"):
        report = {"train": compute_metrics(nn.predict(result.params, result.train.features),
                                           result.train.target).to_dict(),
                  "validation": None,
                  "n_train": len(result.train), "n_test": len(result.test),
                  "epochs": config.epochs, "optimizer": config.optimizer, "seed": config.seed}
        if len(result.test) >= 2:
            report["validation"] = compute_metrics(nn.predict(result.params, result.test.features),
                                                   result.test.target).to_dict()
    with stage("write"):
        save_model(model_path, result.params, result.stats, config.seed, result.adam_state)
        result.history.write_csv(history_path)
        _write_json(report, metrics_path)
    log.info("wrote %s, %s, %s", model_path, history_path, metrics_path)
    return EXIT_OK


def _read_prediction_input(path: str, names):
    if not os.path.exists(path):
        raise FileNotFoundError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        for name in names:
            if name not in header:
                raise SchemaError(f"{path}: missing feature column {name!r}")
        rows = [row for row in reader if row]
    idx = [header.index(n) for n in names]
    X = np.full((len(rows), len(names)), math.nan)
    for i, row in enumerate(rows):
        for j, c in enumerate(idx):
            try:
                X[i, j] = float(row[c])
            except (ValueError, IndexError):
                pass
    X[~np.isfinite(X)] = math.nan
    return header, rows, X


def cmd_predict(args) -> int:
    with stage("load-model"):
        params, stats, _ = load_model(args.model)
    if args.grid:
        with stage("ingest"):
            channels = feature_channels(args.input)
        with stage("predict"):
            grid = predict_grid(params, stats, channels)
        with stage("write"):
            write_grid_csv(grid, args.output, args.column)
        return EXIT_OK
    with stage("ingest"):
        header, rows, X = _read_prediction_input(args.input, stats.feature_names)
    with stage("predict"):
        ok = np.all(np.isfinite(X), axis=1)
        pred = np.full(X.shape[0], math.nan)
        if ok.any():
            pred[ok] = nn.predict(params, stats.apply(X[ok]))
    with stage("write"):
        keep = [c for c in ("lat", "lon", "time", TARGET) if c in header]
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(keep + [args.column])
            for row, p in zip(rows, pred):
                cells = [row[header.index(c)] if header.index(c) < len(row) else "" for c in keep]
                w.writerow(cells + [repr(float(p)) if math.isfinite(p) else ""])
    log.info("wrote %d predictions to %s", len(rows), args.output)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    with stage("ingest"):
        if not os.path.exists(args.input):
            raise FileNotFoundError(f"input file not found: {args.input}")
        with open(args.input, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = [f.strip().lower() for f in (reader.fieldnames or [])]
            reader.fieldnames = fields
            for name in (args.predicted_column, args.reference_column):
                if name not in fields:
                    raise SchemaError(f"{args.input}: missing column {name!r}")
            pairs = []
            for row in reader:
                try:
                    p, r = float(row[args.predicted_column]), float(row[args.reference_column])
                except (TypeError, ValueError):
                    continue
                if math.isfinite(p) and math.isfinite(r):
                    pairs.append((p, r))
    with stage("evaluate"):
        arr = np.array(pairs, dtype=np.float64).reshape(-1, 2)
        metrics = compute_metrics(arr[:, 0], arr[:, 1]).to_dict()
    with stage("write"):
        if args.output:
            _write_json(metrics, args.output)
        else:
            json.dump(metrics, sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
    return EXIT_OK


def cmd_transect(args) -> int:
    pcol = args.predicted_column or args.column
    rcol = args.reference_column or args.column
    with stage("ingest"):
        predicted = read_grid_csv(args.predicted, [pcol])[pcol]
        reference = read_grid_csv(args.reference, [rcol])[rcol]
    with stage("compare"):
        rows = compare_transects(predicted, reference, args.latitudes, args.year)
    with stage("write"):
        write_comparison_csv(rows, args.output)
        if args.transects_output:
            avg = annual_average(predicted, args.year)
            write_transects_csv([extract_transect(avg, lat, 0) for lat in args.latitudes],
                                args.transects_output)
    for r in rows:
        log.info("lat %g: stddev %.2f kg/m2, correlation %.2f%%", r.latitude, r.stddev_kg_m2, r.correlation_pct)
    return EXIT_OK


def cmd_synth(args) -> int:
    with stage("config"):
        config = SynthConfig(n_samples=args.n_samples, noise_std=args.noise_std,
                             seed=0 if args.seed is None else args.seed,
                             lat_min=args.lat_min, lat_max=args.lat_max,
                             lon_min=args.lon_min, lon_max=args.lon_max,
                             resolution=args.resolution, start_year=args.start_year, n_years=args.n_years)
    with stage("generate"):
        table = synth_grid(config) if args.grid else synth_generate(config)
    with stage("write"):
        write_csv(table, args.output)
    log.info("wrote %d synthetic rows to %s", len(table), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="tcwvnet", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a model on a sample CSV")
    p.add_argument("--input", help="sample CSV (overrides paths.input)")
    p.add_argument("--model", help="model JSON output (default model.json)")
    p.add_argument("--history", help="per-epoch history CSV (default history.csv)")
    p.add_argument("--metrics", help="final metrics JSON (default metrics.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict TCWV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="sample CSV, or long-format grid CSV with --grid")
    p.add_argument("--output", required=True)
    p.add_argument("--grid", action="store_true", help="treat input as gridded time,lat,lon CSV")
    p.add_argument("--column", default="tcwv_pred", help="name of the prediction column")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="metrics between two columns of a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--predicted-column", default="tcwv_pred")
    p.add_argument("--reference-column", default=TARGET)
    p.add_argument("--output", help="metrics JSON (default: stdout)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("transect", parents=[common], help="annual-mean transect comparison table")
    p.add_argument("--predicted", required=True, help="gridded CSV of predicted TCWV")
    p.add_argument("--reference", required=True, help="gridded CSV of reference TCWV")
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--latitudes", type=float, nargs="+", default=list(DEFAULT_LATITUDES))
    p.add_argument("--column", default=TARGET)
    p.add_argument("--predicted-column")
    p.add_argument("--reference-column")
    p.add_argument("--output", required=True, help="comparison CSV")
    p.add_argument("--transects-output", help="optional CSV of the predicted annual transects")
    p.set_defaults(func=cmd_transect)

    d = SynthConfig()
    p = sub.add_parser("synth", parents=[common], help="write a synthetic sample CSV")
    p.add_argument("--n-samples", type=int, default=d.n_samples)
    p.add_argument("--noise-std", type=float, default=d.noise_std)
    p.add_argument("--lat-min", type=float, default=d.lat_min)
    p.add_argument("--lat-max", type=float, default=d.lat_max)
    p.add_argument("--lon-min", type=float, default=d.lon_min)
    p.add_argument("--lon-max", type=float, default=d.lon_max)
    p.add_argument("--resolution", type=float, default=d.resolution)
    p.add_argument("--start-year", type=int, default=d.start_year)
    p.add_argument("--n-years", type=int, default=d.n_years)
    p.add_argument("--grid", action="store_true", help="every grid cell for every month instead of random samples")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("config", None), ("seed", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        return args.func(args)
    except StageError as err:
        print(f"tcwvnet {args.command}: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
