"""Command-line entry point: generate, decompose, diagnose, run, evaluate.

Exit codes: 0 success, 1 usage error, 2 data or model error. Diagnostics go
to stderr; data goes to files under --out-dir or to stdout. Configuration
precedence is flags > config file (flat key=value lines) > built-in
defaults. The TRICAST_THREADS environment variable caps internal
parallelism; the current engines are sequential, so any cap >= 0 is
accepted and recorded (0, the default, means sequential).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from datetime import datetime
from pathlib import Path

import numpy as np

from . import arima, gbt, lstm, metrics, pipeline, stationarity
from .decomposition import StlParams, classical_decompose, stl_decompose
from .series import (
    DEFAULT_STEP_SECONDS,
    SplitSpec,
    TimeSeries,
    TrendSpec,
    demo_traffic_series,
    generate_synthetic,
    load_csv,
    normalize_seasonal,
)

_HYBRID_NAME = "LSTM-ARIMA-GBT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def thread_cap() -> int:
    raw = os.environ.get("TRICAST_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"TRICAST_THREADS must be an integer, got {raw!r}") from None
    if cap < 0:
        raise ValueError(f"TRICAST_THREADS must be >= 0, got {cap}")
    return cap


def _column_arg(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def _parse_config_file(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _as_bool(value: str) -> bool:
    low = value.lower()
    if low in _BOOL_TRUE:
        return True
    if low in _BOOL_FALSE:
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def build_pipeline_config(options: dict[str, str]) -> pipeline.PipelineConfig:
    """Resolve a flat key=value mapping into a PipelineConfig."""
    o = dict(options)

    def pop(key, cast, default):
        return cast(o.pop(key)) if key in o else default

    lstm_cfg = lstm.LstmConfig(
        hidden_size=pop("lstm.hidden_size", int, 128),
        window=pop("lstm.window", int, 10),
        learning_rate=pop("lstm.learning_rate", float, 0.001),
        epochs=pop("lstm.epochs", int, 200),
        batch_size=pop("lstm.batch_size", int, 32),
        dropout=pop("lstm.dropout", float, 0.2),
    )
    gbt_cfg = gbt.GbtConfig(
        n_trees=pop("gbt.n_trees", int, 1000),
        learning_rate=pop("gbt.learning_rate", float, 0.05),
        max_depth=pop("gbt.max_depth", int, 6),
        subsample=pop("gbt.subsample", float, 0.8),
        colsample=pop("gbt.colsample", float, 0.8),
        reg_lambda=pop("gbt.reg_lambda", float, 1.0),
        gamma=pop("gbt.gamma", float, 0.0),
        min_child_weight=pop("gbt.min_child_weight", float, 1.0),
    )
    order = arima.ArimaOrder(
        p=pop("arima.p", int, 2), d=pop("arima.d", int, 1), q=pop("arima.q", int, 2)
    )
    period = pop("period", int, 10)
    stl_params = None
    stl_keys = {k for k in o if k.startswith("stl.")}
    if stl_keys:
        stl_params = StlParams(
            n_p=period,
            n_s=pop("stl.n_s", int, 7),
            n_l=pop("stl.n_l", int, None) if "stl.n_l" in o else None,
            n_t=pop("stl.n_t", int, None) if "stl.n_t" in o else None,
            inner_iterations=pop("stl.inner_iterations", int, 2),
            outer_iterations=pop("stl.outer_iterations", int, 1),
        )
    config = pipeline.PipelineConfig(
        period=period,
        decomposition=pop("decomposition", str, "classical"),
        split=SplitSpec(pop("split", float, 0.8)),
        lstm=lstm_cfg,
        arima_order=order,
        gbt=gbt_cfg,
        seed=pop("seed", int, 0),
        strict_causal=pop("strict_causal", _as_bool, False),
        one_step_eval=pop("one_step_eval", _as_bool, False),
        stl_params=stl_params,
    )
    if o:
        raise ValueError(f"unknown configuration keys: {sorted(o)}")
    return config


def config_as_mapping(config: pipeline.PipelineConfig) -> dict[str, str]:
    """Flat key=value snapshot; build_pipeline_config inverts it."""
    out = {
        "period": str(config.period),
        "decomposition": config.decomposition,
        "split": repr(config.split.train_fraction),
        "seed": str(config.seed),
        "strict_causal": str(config.strict_causal).lower(),
        "one_step_eval": str(config.one_step_eval).lower(),
        "arima.p": str(config.arima_order.p),
        "arima.d": str(config.arima_order.d),
        "arima.q": str(config.arima_order.q),
    }
    c = config.lstm
    out.update({
        "lstm.hidden_size": str(c.hidden_size), "lstm.window": str(c.window),
        "lstm.learning_rate": repr(c.learning_rate), "lstm.epochs": str(c.epochs),
        "lstm.batch_size": str(c.batch_size), "lstm.dropout": repr(c.dropout),
    })
    g = config.gbt
    out.update({
        "gbt.n_trees": str(g.n_trees), "gbt.learning_rate": repr(g.learning_rate),
        "gbt.max_depth": str(g.max_depth), "gbt.subsample": repr(g.subsample),
        "gbt.colsample": repr(g.colsample), "gbt.reg_lambda": repr(g.reg_lambda),
        "gbt.gamma": repr(g.gamma), "gbt.min_child_weight": repr(g.min_child_weight),
    })
    if config.stl_params is not None:
        s = config.stl_params
        out.update({
            "stl.n_s": str(s.n_s),
            "stl.inner_iterations": str(s.inner_iterations),
            "stl.outer_iterations": str(s.outer_iterations),
        })
        if s.n_l is not None:
            out["stl.n_l"] = str(s.n_l)
        if s.n_t is not None:
            out["stl.n_t"] = str(s.n_t)
    return out


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _load_input(args) -> TimeSeries:
    return load_csv(
        args.input,
        value_column=_column_arg(args.value_column),
        time_column=_column_arg(args.time_column) if args.time_column else None,
    )


def _write_forecast_csv(path: Path, series: TimeSeries, start_index: int,
                        values: np.ndarray) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "timestamp", "value"])
        for i, v in enumerate(values):
            idx = start_index + i
            writer.writerow([idx, series.timestamp(idx).isoformat(), format(v, ".15g")])


def _metrics_rows_to_csv(path: Path, rows: list[tuple[str, metrics.EvalReport]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model", "mae", "rmse", "r2"])
        for name, rep in rows:
            writer.writerow([name, *rep.row()])


def _metrics_table(rows: list[tuple[str, metrics.EvalReport]]) -> str:
    width = max(len(name) for name, _ in rows + [("Model", None)])
    lines = [f"{'Model':<{width}}  {'MAE':>9}  {'RMSE':>9}  {'R2':>9}"]
    for name, rep in rows:
        mae, rmse, r2 = rep.row()
        lines.append(f"{name:<{width}}  {mae:>9}  {rmse:>9}  {r2:>9}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- generate


def _cmd_generate(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.preset == "traffic":
        series = demo_traffic_series(seed=args.seed, n=args.n, period=args.period,
                                     noise_sigma=args.sigma)
    else:
        trend = TrendSpec(tuple(float(a) for a in args.trend.split(",")))
        if args.seasonal:
            factors = np.array([float(f) for f in args.seasonal.split(",")])
            if args.normalize_seasonal:
                factors = normalize_seasonal(factors)
        else:
            factors = np.ones(args.period)
        series = generate_synthetic(
            n=args.n, period=args.period, trend=trend, seasonal_factors=factors,
            noise_sigma=args.sigma, seed=args.seed,
            start_time=datetime.fromisoformat(args.start), step=args.step,
        )
    from .series import write_csv

    target = out_dir / args.filename
    write_csv(series, target)
    print(f"wrote {len(series)} points to {target}", file=sys.stderr)
    return 0


# --------------------------------------------------------------- decompose


def _cmd_decompose(args) -> int:
    series = _load_input(args)
    if args.method == "classical":
        if args.mode != "multiplicative":
            raise ValueError("the classical method is multiplicative only")
        decomp = classical_decompose(series, args.period)
    else:
        decomp = stl_decompose(series, StlParams(n_p=args.period), mode=args.mode)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "decomposition.csv"
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["observed", "trend", "seasonal", "residual"])
        for i in range(len(series)):
            writer.writerow([
                format(series.values[i], ".15g"),
                format(decomp.trend[i], ".15g"),
                format(decomp.seasonal[i], ".15g"),
                format(decomp.residual[i], ".15g"),
            ])
    print(f"wrote {target}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------- diagnose


def _cmd_diagnose(args) -> int:
    series = _load_input(args)
    values = stationarity.difference(series.values, args.difference)
    result = stationarity.adf_test(values)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, points in (
        ("acf.csv", stationarity.acf(values, args.max_lag)),
        ("pacf.csv", stationarity.pacf(values, args.max_lag)),
    ):
        with (out_dir / name).open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["lag", "value", "bound"])
            for p in points:
                writer.writerow([p.lag, format(p.value, ".15g"),
                                 format(p.confidence_bound, ".15g")])
    stat = "stationary" if result.reject_unit_root else "unit root not rejected"
    print(
        f"adf statistic={result.statistic:.4f} lags={result.lags_used} "
        f"crit5={result.critical_value_5pct:.4f} -> {stat}"
    )
    return 0


# --------------------------------------------------------------------- run


def _cmd_run(args) -> int:
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    in_path = Path(args.input)
    series = _load_input(args)
    input_digest = _sha256(in_path)
    timings["load"] = time.perf_counter() - t0

    options: dict[str, str] = {}
    if args.manifest:
        manifest_in = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        options.update(manifest_in["config"])
        recorded = manifest_in.get("input", {}).get("sha256")
        if recorded and recorded != input_digest:
            raise ValueError(
                f"input digest {input_digest[:12]}... does not match manifest "
                f"{recorded[:12]}..."
            )
    if args.config:
        options.update(_parse_config_file(Path(args.config)))
    for key, value in _flag_overrides(args).items():
        options[key] = value
    config = build_pipeline_config(options)

    t0 = time.perf_counter()
    fitted = pipeline.fit_hybrid(series, config)
    timings["fit"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    results = [("rollout", pipeline.forecast_hybrid(fitted, one_step=False))]
    if config.one_step_eval:
        results.append(("one_step", pipeline.forecast_hybrid(fitted, one_step=True)))
    timings["forecast"] = time.perf_counter() - t0

    baseline_rows: list[tuple[str, metrics.EvalReport]] = []
    if args.with_baselines:
        t0 = time.perf_counter()
        for kind, label in (("lstm", "LSTM"), ("arima", "ARIMA"), ("gbt", "GBT")):
            baseline_rows.append((label, pipeline.run_single(series, kind, config)))
        timings["baselines"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: dict[str, Path] = {}
    metric_rows: list[tuple[str, metrics.EvalReport]] = []
    component_lines = ["protocol,component,mae,rmse,r2,mape,n"]
    for tag, result in results:
        suffix = "" if tag == "rollout" else "_one_step"
        for name, values in (
            ("trend_forecast", result.trend_forecast),
            ("seasonal_forecast", result.seasonal_forecast),
            ("residual_forecast", result.residual_forecast),
            ("combined_forecast", result.combined),
        ):
            path = out_dir / f"{name}{suffix}.csv"
            _write_forecast_csv(path, series, result.split_index, values)
            artifacts[f"{name}{suffix}"] = path
        label = _HYBRID_NAME if tag == "rollout" else f"{_HYBRID_NAME} (one-step)"
        metric_rows.append((label, result.combined_report))
        for comp, rep in (
            ("trend", result.trend_report),
            ("seasonal", result.seasonal_report),
            ("residual", result.residual_report),
        ):
            fmt = lambda v: "n/a" if v is None else format(v, ".6f")
            component_lines.append(
                f"{tag},{comp},{rep.mae:.6f},{rep.rmse:.6f},{fmt(rep.r2)},"
                f"{fmt(rep.mape)},{rep.n}"
            )
    metric_rows.extend(baseline_rows)

    metrics_csv = out_dir / "metrics.csv"
    _metrics_rows_to_csv(metrics_csv, metric_rows)
    artifacts["metrics_csv"] = metrics_csv
    metrics_txt = out_dir / "metrics.txt"
    metrics_txt.write_text(_metrics_table(metric_rows), encoding="utf-8")
    artifacts["metrics_txt"] = metrics_txt
    components_csv = out_dir / "component_metrics.csv"
    components_csv.write_text("\n".join(component_lines) + "\n", encoding="utf-8")
    artifacts["component_metrics"] = components_csv
    timings["write"] = time.perf_counter() - t0

    manifest = {
        "format": "tricast-run-v1",
        "command": "run",
        "config": config_as_mapping(config),
        "seed": config.seed,
        "threads_cap": thread_cap(),
        "input": {"path": str(in_path), "sha256": input_digest},
        "artifacts": {
            name: {"path": path.name, "sha256": _sha256(path)}
            for name, path in sorted(artifacts.items())
        },
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    sys.stdout.write(_metrics_table(metric_rows))
    return 0


def _flag_overrides(args) -> dict[str, str]:
    """Only flags the user actually passed (None/False defaults are sentinels)."""
    out: dict[str, str] = {}
    if args.period is not None:
        out["period"] = str(args.period)
    if args.split is not None:
        out["split"] = repr(args.split)
    if args.decomposition is not None:
        out["decomposition"] = args.decomposition
    if args.seed is not None:
        out["seed"] = str(args.seed)
    if args.strict_causal:
        out["strict_causal"] = "true"
    if args.one_step_eval:
        out["one_step_eval"] = "true"
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------- evaluate


def _cmd_evaluate(args) -> int:
    predicted = load_csv(args.predicted, value_column=_column_arg(args.value_column))
    actual = load_csv(args.actual, value_column=_column_arg(args.value_column))
    report = metrics.evaluate(predicted.values, actual.values)
    sys.stdout.write(_metrics_table([("forecast", report)]))
    mape = "n/a" if report.mape is None else f"{report.mape:.4f}%"
    sys.stdout.write(f"MAPE (extension): {mape}  n={report.n}\n")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tricast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input_flags(p):
        p.add_argument("--input", required=True, help="input CSV path")
        p.add_argument("--value-column", default="value",
                       help="value column name or 0-based index")
        p.add_argument("--time-column", default=None,
                       help="timestamp column name or index (optional)")

    p = sub.add_parser("generate", help="write a synthetic traffic-like series")
    p.add_argument("--n", type=int, default=998)
    p.add_argument("--period", type=int, default=10)
    p.add_argument("--preset", choices=["traffic", "custom"], default="traffic")
    p.add_argument("--trend", default="20",
                   help="comma-separated anchor levels (custom preset)")
    p.add_argument("--seasonal", default="",
                   help="comma-separated per-phase factors (custom preset)")
    p.add_argument("--normalize-seasonal", action="store_true",
                   help="rescale factors to geometric mean 1")
    p.add_argument("--sigma", type=float, default=0.08)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=DEFAULT_STEP_SECONDS)
    p.add_argument("--start", default="2015-11-11T00:00:00")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--filename", default="series.csv")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("decompose", help="write observed/trend/seasonal/residual CSV")
    add_input_flags(p)
    p.add_argument("--period", type=int, default=10)
    p.add_argument("--method", choices=["classical", "stl"], default="classical")
    p.add_argument("--mode", choices=["additive", "multiplicative"],
                   default="multiplicative")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("diagnose", help="ADF result plus ACF/PACF CSVs")
    add_input_flags(p)
    p.add_argument("--difference", type=int, default=0,
                   help="difference the series this many times first")
    p.add_argument("--max-lag", type=int, default=20)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("run", help="train the hybrid pipeline and forecast")
    add_input_flags(p)
    p.add_argument("--period", type=int, default=None)
    p.add_argument("--split", type=float, default=None)
    p.add_argument("--decomposition", choices=["classical", "stl"], default=None)
    p.add_argument("--strict-causal", action="store_true")
    p.add_argument("--one-step-eval", action="store_true",
                   help="also report the teacher-forced protocol")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--manifest", default=None,
                   help="replay the config snapshot of a previous run manifest")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--with-baselines", action="store_true",
                   help="also fit single-model baselines on the raw series")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("evaluate", help="score a forecast CSV against actuals")
    p.add_argument("--predicted", required=True)
    p.add_argument("--actual", required=True)
    p.add_argument("--value-column", default="value")
    p.set_defaults(func=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # -h/--help
        return int(exc.code or 0)
    try:
        thread_cap()
        return args.func(args)
    except (ValueError, OSError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"tricast: error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
