"""Decomposition-driven hybrid traffic-flow forecasting toolkit."""

from .decomposition import (
    Decomposition,
    StlParams,
    classical_decompose,
    loess_smooth,
    moving_average,
    stl_decompose,
)
from .metrics import EvalReport, evaluate
from .pipeline import (
    FittedHybrid,
    HybridForecast,
    PipelineConfig,
    fit_hybrid,
    forecast_hybrid,
    run_hybrid,
    run_single,
)
from .series import (
    SplitSpec,
    TimeSeries,
    TrendSpec,
    demo_traffic_series,
    generate_synthetic,
    load_csv,
    normalize_seasonal,
    split_chronological,
    write_csv,
)
from .stationarity import AdfResult, CorrelogramPoint, acf, adf_test, difference, pacf

__version__ = "0.1.0"

__all__ = [
    "AdfResult",
    "CorrelogramPoint",
    "Decomposition",
    "EvalReport",
    "FittedHybrid",
    "HybridForecast",
    "PipelineConfig",
    "SplitSpec",
    "StlParams",
    "TimeSeries",
    "TrendSpec",
    "acf",
    "adf_test",
    "classical_decompose",
    "demo_traffic_series",
    "difference",
    "evaluate",
    "fit_hybrid",
    "forecast_hybrid",
    "generate_synthetic",
    "load_csv",
    "loess_smooth",
    "moving_average",
    "normalize_seasonal",
    "pacf",
    "run_hybrid",
    "run_single",
    "split_chronological",
    "stl_decompose",
    "write_csv",
]
