"""Forecast error metrics: MAE, RMSE, R2, and MAPE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    """Error summary for one prediction/actual pair.

    `r2` is None when the actuals are constant (undefined denominator) and
    `mape` is None when any actual is exactly zero.
    """

    mae: float
    rmse: float
    r2: float | None
    mape: float | None
    n: int

    def row(self) -> tuple[str, str, str]:
        fmt = lambda x: "n/a" if x is None else f"{x:.4f}"
        return (fmt(self.mae), fmt(self.rmse), fmt(self.r2))


def evaluate(predicted, actual) -> EvalReport:
    """Compute MAE, RMSE, R2, and MAPE of `predicted` against `actual`."""
    f = np.asarray(predicted, dtype=float)
    r = np.asarray(actual, dtype=float)
    if f.shape != r.shape or f.ndim != 1:
        raise ValueError(f"shape mismatch: predicted {f.shape}, actual {r.shape}")
    if f.size == 0:
        raise ValueError("cannot evaluate empty sequences")
    err = f - r
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err**2)))
    sst = float(np.sum((r - r.mean()) ** 2))
    r2 = None if sst == 0.0 else float(1.0 - np.sum(err**2) / sst)
    mape = None
    if np.all(r != 0.0):
        mape = float(100.0 * np.mean(np.abs(err) / np.abs(r)))
    return EvalReport(mae=mae, rmse=rmse, r2=r2, mape=mape, n=int(f.size))
