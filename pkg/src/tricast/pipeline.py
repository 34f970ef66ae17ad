"""End-to-end hybrid forecast: decompose, model each component, recombine.

The series is decomposed multiplicatively (classical method by default),
the trend is learned by the LSTM, the seasonal component by ARIMA, and the
residual by boosted trees on lag/rolling/calendar features; the combined
forecast is the elementwise product of the three component forecasts over
the held-out horizon.

By default the decomposition runs over the full series before splitting,
matching the source procedure; that leaks test-range smoothing into the
training components. `strict_causal` decomposes the training range only
and extends components causally (trend by local log-linear extrapolation,
seasonal by periodic repetition).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import arima, gbt, lstm
from .decomposition import Decomposition, StlParams, classical_decompose, stl_decompose
from .metrics import EvalReport, evaluate
from .seeding import derive_seed
from .series import SplitSpec, TimeSeries

MIN_SERIES_LENGTH = 2 * gbt.MIN_HISTORY + 10


class StageError(ValueError):
    """A component stage failed; the message names the stage."""


@dataclass(frozen=True)
class PipelineConfig:
    period: int = 10
    decomposition: str = "classical"  # "classical" | "stl"
    split: SplitSpec = SplitSpec(0.8)
    lstm: lstm.LstmConfig = lstm.LstmConfig()
    arima_order: arima.ArimaOrder = arima.ArimaOrder(2, 1, 2)
    gbt: gbt.GbtConfig = gbt.GbtConfig()
    seed: int = 0
    strict_causal: bool = False
    one_step_eval: bool = False
    stl_params: StlParams | None = None

    def __post_init__(self):
        if self.period < 2:
            raise ValueError("period must be >= 2")
        if self.decomposition not in ("classical", "stl"):
            raise ValueError("decomposition must be 'classical' or 'stl'")

    def resolved_stl_params(self) -> StlParams:
        return self.stl_params if self.stl_params is not None else StlParams(n_p=self.period)


@dataclass(frozen=True)
class HybridForecast:
    """Component and combined forecasts over the test horizon, with reports."""

    trend_forecast: np.ndarray
    seasonal_forecast: np.ndarray
    residual_forecast: np.ndarray
    combined: np.ndarray
    combined_report: EvalReport
    trend_report: EvalReport
    seasonal_report: EvalReport
    residual_report: EvalReport
    split_index: int
    one_step: bool


@dataclass
class FittedHybrid:
    """Trained stage artifacts; forecast_hybrid turns these into forecasts."""

    series: TimeSeries
    config: PipelineConfig
    decomposition: Decomposition
    split_index: int
    lstm_model: lstm.LstmModel
    arima_model: arima.ArimaModel | None
    gbt_model: gbt.GbtModel
    seasonal_extension: np.ndarray | None = field(default=None, repr=False)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise StageError(f"{name} stage failed: {exc}") from exc


def _loess_line_extension(values: np.ndarray, span: int, horizon: int) -> np.ndarray:
    """Continue the local weighted linear fit at the series end, in log space
    so the extension stays positive."""
    ln = np.log(values)
    m = min(span, ln.size)
    tail = ln[-m:]
    tc = np.arange(m, dtype=float) - (m - 1)
    d = np.abs(tc)
    dmax = d.max() if d.max() > 0 else 1.0
    w = (1.0 - (d / dmax) ** 3) ** 3
    w[-1] = 1.0  # the end point itself always carries full weight
    a = np.stack([np.ones(m), tc], axis=1)
    aw = a * w[:, None]
    coef = np.linalg.lstsq(aw.T @ a, aw.T @ tail, rcond=None)[0] if m > 1 else np.array(
        [tail[0], 0.0]
    )
    steps = np.arange(1, horizon + 1, dtype=float)
    return np.exp(coef[0] + coef[1] * steps)


def _decompose(series: TimeSeries, config: PipelineConfig, k: int) -> Decomposition:
    n = len(series)
    if not config.strict_causal:
        if config.decomposition == "classical":
            return classical_decompose(series, config.period)
        return stl_decompose(series, config.resolved_stl_params(), mode="multiplicative")
    # Strict-causal: decompose the training range, extend over the horizon.
    sub = series.slice(0, k)
    if config.decomposition == "classical":
        d = classical_decompose(sub, config.period)
    else:
        d = stl_decompose(sub, config.resolved_stl_params(), mode="multiplicative")
    horizon = n - k
    span = max(3, int(1.5 * config.period) | 1)
    trend_ext = _loess_line_extension(d.trend, span, horizon)
    phase = np.arange(horizon) % config.period
    seasonal_ext = d.seasonal[k - config.period + phase]
    resid_ext = series.values[k:] / (trend_ext * seasonal_ext)
    return Decomposition(
        mode="multiplicative",
        period=config.period,
        trend=np.r_[d.trend, trend_ext],
        seasonal=np.r_[d.seasonal, seasonal_ext],
        residual=np.r_[d.residual, resid_ext],
    )


def fit_hybrid(series: TimeSeries, config: PipelineConfig) -> FittedHybrid:
    """Decompose, split, and train the three component models."""
    n = len(series)
    if n < MIN_SERIES_LENGTH:
        raise ValueError(
            f"series length {n} < {MIN_SERIES_LENGTH} required for full feature validity"
        )
    if np.any(series.values <= 0):
        raise ValueError("hybrid pipeline requires a strictly positive series")
    k = config.split.split_index(n)
    if k == 0 or k == n:
        raise ValueError("split leaves an empty partition")

    decomp = _stage("decomposition", _decompose, series, config, k)

    lstm_cfg = replace(config.lstm, seed=derive_seed(config.seed, "lstm-trend"))
    lstm_model = _stage("lstm-trend", lstm.train, decomp.trend[:k], lstm_cfg)

    seasonal_by_repetition = config.strict_causal and config.decomposition == "classical"
    arima_model = None
    if not seasonal_by_repetition:
        arima_model = _stage("arima-seasonal", arima.fit, decomp.seasonal[:k],
                             config.arima_order)

    gbt_cfg = replace(config.gbt, seed=derive_seed(config.seed, "gbt-residual"))
    train_series = series.slice(0, k)
    feats = _stage("gbt-features", gbt.build_features, train_series, decomp.residual[:k])
    gbt_model = _stage("gbt-residual", gbt.fit, feats, decomp.residual[:k], gbt_cfg)

    seasonal_ext = decomp.seasonal[k:] if seasonal_by_repetition else None
    return FittedHybrid(
        series=series, config=config, decomposition=decomp, split_index=k,
        lstm_model=lstm_model, arima_model=arima_model, gbt_model=gbt_model,
        seasonal_extension=seasonal_ext,
    )


def _one_step_trend(fitted: FittedHybrid) -> np.ndarray:
    """Teacher-forced protocol: observed component windows feed each step."""
    model = fitted.lstm_model
    w = model.config.window
    trend = fitted.decomposition.trend
    preds = [
        lstm.forward(model, model.normalize(trend[t - w : t]))
        for t in range(fitted.split_index, len(fitted.series))
    ]
    return model.denormalize(np.array(preds))


def _one_step_residual(fitted: FittedHybrid) -> np.ndarray:
    resid = fitted.decomposition.residual
    rows = np.stack([
        gbt.feature_row(resid[:t], fitted.series.timestamp(t))
        for t in range(fitted.split_index, len(fitted.series))
    ])
    return gbt.predict(fitted.gbt_model, rows)


def forecast_hybrid(fitted: FittedHybrid, one_step: bool = False) -> HybridForecast:
    """Forecast every component over the horizon and recombine by product."""
    series, decomp, k = fitted.series, fitted.decomposition, fitted.split_index
    horizon = len(series) - k

    if one_step:
        trend_fc = _stage("lstm-trend", _one_step_trend, fitted)
    else:
        trend_fc = _stage("lstm-trend", lstm.forecast_trend, fitted.lstm_model,
                          decomp.trend[:k], horizon)

    if fitted.arima_model is None:
        seasonal_fc = fitted.seasonal_extension.copy()
    else:
        seasonal_fc = _stage("arima-seasonal", arima.forecast, fitted.arima_model, horizon)

    if one_step:
        resid_fc = _stage("gbt-residual", _one_step_residual, fitted)
    else:
        resid_fc = _stage("gbt-residual", gbt.forecast_residual, fitted.gbt_model,
                          series, decomp.residual[:k], horizon)

    combined = trend_fc * seasonal_fc * resid_fc
    return HybridForecast(
        trend_forecast=trend_fc,
        seasonal_forecast=seasonal_fc,
        residual_forecast=resid_fc,
        combined=combined,
        combined_report=evaluate(combined, series.values[k:]),
        trend_report=evaluate(trend_fc, decomp.trend[k:]),
        seasonal_report=evaluate(seasonal_fc, decomp.seasonal[k:]),
        residual_report=evaluate(resid_fc, decomp.residual[k:]),
        split_index=k,
        one_step=one_step,
    )


def run_hybrid(series: TimeSeries, config: PipelineConfig) -> HybridForecast:
    """fit_hybrid followed by forecast_hybrid under config.one_step_eval."""
    return forecast_hybrid(fit_hybrid(series, config), one_step=config.one_step_eval)


def run_single(series: TimeSeries, model_kind: str, config: PipelineConfig) -> EvalReport:
    """Baseline protocol: one model on the raw series, same split and schema."""
    n = len(series)
    if n < MIN_SERIES_LENGTH:
        raise ValueError(
            f"series length {n} < {MIN_SERIES_LENGTH} required for full feature validity"
        )
    k = config.split.split_index(n)
    horizon = n - k
    train_values = series.values[:k]
    test_values = series.values[k:]

    if model_kind == "lstm":
        cfg = replace(config.lstm, seed=derive_seed(config.seed, "lstm-raw"))
        model = _stage("lstm-raw", lstm.train, train_values, cfg)
        if config.one_step_eval:
            w = cfg.window
            preds = [
                lstm.forward(model, model.normalize(series.values[t - w : t]))
                for t in range(k, n)
            ]
            forecast = model.denormalize(np.array(preds))
        else:
            forecast = lstm.forecast_trend(model, train_values, horizon)
    elif model_kind == "arima":
        model = _stage("arima-raw", arima.fit, train_values, config.arima_order)
        forecast = arima.forecast(model, horizon)
    elif model_kind == "gbt":
        cfg = replace(config.gbt, seed=derive_seed(config.seed, "gbt-raw"))
        feats = _stage("gbt-features", gbt.build_features, series.slice(0, k), train_values)
        model = _stage("gbt-raw", gbt.fit, feats, train_values, cfg)
        if config.one_step_eval:
            rows = np.stack([
                gbt.feature_row(series.values[:t], series.timestamp(t))
                for t in range(k, n)
            ])
            forecast = gbt.predict(model, rows)
        else:
            forecast = gbt.forecast_residual(model, series, train_values, horizon)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}; expected lstm|arima|gbt")
    return evaluate(forecast, test_values)
