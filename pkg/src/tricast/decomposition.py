"""Trend/seasonal/residual decomposition.

Two algorithms over the same result type: the iterated LOESS procedure
(cycle-subseries smoothing, low-pass filtering, trend smoothing, optional
robustness reweighting) and the classical moving-average method that the
forecasting pipeline uses by default. Multiplicative decomposition is the
additive algorithm applied to logs, exponentiated per component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import TimeSeries

Mode = str  # "additive" | "multiplicative"


@dataclass(frozen=True)
class Decomposition:
    """Aligned component series; reconstruct() recombines them."""

    mode: Mode
    period: int
    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray

    def __post_init__(self):
        if self.mode not in ("additive", "multiplicative"):
            raise ValueError(f"unknown mode {self.mode!r}")
        n = len(self.trend)
        if len(self.seasonal) != n or len(self.residual) != n:
            raise ValueError("component series must have equal lengths")

    def reconstruct(self) -> np.ndarray:
        if self.mode == "additive":
            return self.trend + self.seasonal + self.residual
        return self.trend * self.seasonal * self.residual


def _smallest_odd_at_least(x: float) -> int:
    k = int(np.ceil(x))
    return k if k % 2 == 1 else k + 1


@dataclass(frozen=True)
class StlParams:
    """Smoothing spans and iteration counts for the LOESS decomposition.

    Defaults follow the usual recommendations: seasonal span 7, low-pass
    span the smallest odd number >= period, and trend span the smallest odd
    number >= 1.5 * period / (1 - 1.5 / seasonal span).
    """

    n_p: int
    n_s: int = 7
    n_l: int | None = None
    n_t: int | None = None
    inner_iterations: int = 2
    outer_iterations: int = 1

    def __post_init__(self):
        if self.n_p < 2:
            raise ValueError("period n_p must be >= 2")
        if self.inner_iterations < 1 or self.outer_iterations < 0:
            raise ValueError("inner_iterations >= 1 and outer_iterations >= 0 required")
        for name in ("n_s", "n_l", "n_t"):
            v = getattr(self, name)
            if v is None:
                continue
            if v < 3 or v % 2 == 0:
                raise ValueError(f"{name} must be an odd count >= 3 (got {v})")

    @property
    def lowpass_span(self) -> int:
        return self.n_l if self.n_l is not None else _smallest_odd_at_least(self.n_p)

    @property
    def trend_span(self) -> int:
        if self.n_t is not None:
            return self.n_t
        return _smallest_odd_at_least(1.5 * self.n_p / (1.0 - 1.5 / self.n_s))


def _loess_at(x, y, targets, span, degree, weights):
    """Local weighted polynomial fit of y on x, evaluated at each target.

    Tricube distance weights over the `span` nearest neighbors, multiplied
    by the per-point robustness weights when given.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    out = np.empty(len(targets))
    for j, t in enumerate(targets):
        lo = int(np.searchsorted(x, t))
        left = min(max(lo - (span + 1) // 2, 0), n - span)
        while left > 0 and (t - x[left - 1]) < (x[left + span - 1] - t):
            left -= 1
        while left + span < n and (x[left + span] - t) < (t - x[left]):
            left += 1
        xw = x[left : left + span]
        d = np.abs(xw - t)
        dmax = d.max()
        if dmax > 0:
            u = d / dmax
            w = np.where(u < 1.0, (1.0 - u**3) ** 3, 0.0)
        else:
            w = np.ones(span)
        if weights is not None:
            w = w * weights[left : left + span]
        if not np.any(w > 0):
            raise ValueError(f"all weights zero in the window around target {t}")
        tc = xw - t
        cols = [np.ones(span)]
        for k in range(1, degree + 1):
            cols.append(tc**k)
        a = np.stack(cols, axis=1)
        aw = a * w[:, None]
        gram = aw.T @ a
        rhs = aw.T @ y[left : left + span]
        try:
            coef = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            coef = np.linalg.lstsq(a * np.sqrt(w)[:, None], np.sqrt(w) * y[left : left + span],
                                   rcond=None)[0]
        out[j] = coef[0]
    return out


def loess_smooth(x, y, span: int, degree: int = 1, weights=None) -> np.ndarray:
    """LOESS-smooth y over ordinates x, returning the fit at each x.

    x must be strictly increasing; robustness weights, when given, must lie
    in [0, 1].
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-D sequences of equal length")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly increasing")
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    if span < degree + 1:
        raise ValueError(f"span {span} too small for degree {degree}")
    if span > x.size:
        raise ValueError(f"span {span} exceeds series length {x.size}")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != x.shape:
            raise ValueError("weights must match x in length")
        if np.any(weights < 0) or np.any(weights > 1):
            raise ValueError("weights must lie in [0, 1]")
    return _loess_at(x, y, x, span, degree, weights)


def moving_average(y, window: int) -> np.ndarray:
    """Centered mean with the given window; output length n - window + 1."""
    y = np.asarray(y, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > y.size:
        raise ValueError(f"window {window} exceeds length {y.size}")
    if window == 1:
        return y.copy()
    return np.convolve(y, np.full(window, 1.0 / window), mode="valid")


def _values(series) -> np.ndarray:
    return np.asarray(getattr(series, "values", series), dtype=float)


def _stl_inner_additive(y: np.ndarray, params: StlParams) -> tuple[np.ndarray, np.ndarray]:
    """Iterated inner/outer loop on an additive series; returns (T, S)."""
    n = y.size
    n_p = params.n_p
    trend = np.zeros(n)
    seasonal = np.zeros(n)
    rho = np.ones(n)
    idx = np.arange(n, dtype=float)

    for outer in range(params.outer_iterations + 1):
        for _ in range(params.inner_iterations):
            detrended = y - trend
            # Cycle-subseries smoothing, each subseries extended one period
            # beyond both boundaries; C spans positions -n_p .. n + n_p - 1.
            cycle = np.empty(n + 2 * n_p)
            for phase in range(n_p):
                sub = detrended[phase::n_p]
                m = sub.size
                pos = np.arange(m, dtype=float)
                targets = np.arange(-1, m + 1, dtype=float)
                span = min(params.n_s, m)
                if span < 2:
                    smoothed = np.full(m + 2, sub.mean())
                else:
                    smoothed = _loess_at(pos, sub, targets, span, 1, rho[phase::n_p])
                slots = phase + n_p * np.arange(-1, m + 1) + n_p
                cycle[slots] = smoothed
            # Low-pass: MA(n_p), MA(n_p), MA(3), then LOESS; length drops
            # from n + 2*n_p back to n.
            low = moving_average(moving_average(moving_average(cycle, n_p), n_p), 3)
            low = _loess_at(idx, low, idx, min(params.lowpass_span, n), 1, None)
            seasonal = cycle[n_p : n_p + n] - low
            deseasonalized = y - seasonal
            trend = _loess_at(idx, deseasonalized, idx, min(params.trend_span, n), 1, rho)
        if outer < params.outer_iterations:
            resid = y - trend - seasonal
            scale = 6.0 * np.median(np.abs(resid))
            if scale <= 0:
                rho = np.ones(n)
            else:
                u = np.abs(resid) / scale
                rho = np.where(u < 1.0, (1.0 - u**2) ** 2, 0.0)
    return trend, seasonal


def stl_decompose(series, params: StlParams, mode: Mode = "additive") -> Decomposition:
    """LOESS decomposition into trend, seasonal, and residual.

    Multiplicative mode runs the additive algorithm on ln(y) and
    exponentiates each component, so y = T * S * R exactly.
    """
    y = _values(series)
    if y.size < 2 * params.n_p:
        raise ValueError(f"series length {y.size} < 2 * period {params.n_p}")
    if mode == "multiplicative":
        if np.any(y <= 0):
            raise ValueError("multiplicative mode requires strictly positive values")
        work = np.log(y)
    elif mode == "additive":
        work = y
    else:
        raise ValueError(f"unknown mode {mode!r}")
    trend, seasonal = _stl_inner_additive(work, params)
    residual = work - trend - seasonal
    if mode == "multiplicative":
        trend, seasonal, residual = np.exp(trend), np.exp(seasonal), np.exp(residual)
    return Decomposition(mode=mode, period=params.n_p, trend=trend,
                         seasonal=seasonal, residual=residual)


def classical_decompose(series, period: int) -> Decomposition:
    """Classical multiplicative decomposition with a fixed seasonal index.

    Trend is the centered moving average over one period (the usual
    half-weighted window when the period is even), with boundary gaps
    filled by the nearest interior value so every component is full
    length. Seasonal indices are per-phase means of y/T, rescaled to
    geometric mean 1; the residual is y / (T * S).
    """
    y = _values(series)
    n = y.size
    if period < 2:
        raise ValueError("period must be >= 2")
    if n < 2 * period:
        raise ValueError(f"series length {n} < 2 * period {period}")
    if np.any(y <= 0):
        raise ValueError("classical multiplicative decomposition requires positive values")

    if period % 2 == 0:
        filt = np.r_[0.5, np.ones(period - 1), 0.5] / period
        head = period // 2
    else:
        filt = np.full(period, 1.0 / period)
        head = (period - 1) // 2
    interior = np.convolve(y, filt, mode="valid")
    trend = np.empty(n)
    trend[head : head + interior.size] = interior
    trend[:head] = interior[0]
    trend[head + interior.size :] = interior[-1]

    detrended = y / trend
    indices = np.array([detrended[j::period].mean() for j in range(period)])
    indices /= np.exp(np.mean(np.log(indices)))
    seasonal = indices[np.arange(n) % period]
    residual = y / (trend * seasonal)
    return Decomposition(mode="multiplicative", period=period, trend=trend,
                         seasonal=seasonal, residual=residual)
