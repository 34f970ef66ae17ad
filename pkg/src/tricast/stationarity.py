"""Stationarity diagnostics: differencing, ACF/PACF, and the ADF test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# MacKinnon (2010) response-surface coefficients for the 5% critical value
# of the constant-only ADF t distribution: c_inf + c1/T + c2/T^2 + c3/T^3.
_MACKINNON_5PCT_CONST = (-2.86154, -2.8903, -4.234, -40.04)


@dataclass(frozen=True)
class AdfResult:
    """Unit-root test outcome; reject when statistic < critical value."""

    statistic: float
    lags_used: int
    critical_value_5pct: float
    reject_unit_root: bool


@dataclass(frozen=True)
class CorrelogramPoint:
    lag: int
    value: float
    confidence_bound: float


def difference(y, order: int) -> np.ndarray:
    """Apply the first-difference operator `order` times."""
    y = np.asarray(y, dtype=float)
    if order < 0:
        raise ValueError("differencing order must be >= 0")
    if order >= y.size:
        raise ValueError(f"cannot difference length {y.size} series {order} times")
    return np.diff(y, n=order) if order else y.copy()


def acf(y, max_lag: int) -> list[CorrelogramPoint]:
    """Autocorrelations at lags 0..max_lag with the n-denominator estimator.

    The biased (n) denominator keeps the autocovariance sequence positive
    semidefinite, which the PACF recursion relies on.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if max_lag >= n:
        raise ValueError(f"max_lag {max_lag} must be < series length {n}")
    centered = y - y.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        raise ValueError("ACF undefined for a constant series")
    bound = 1.96 / np.sqrt(n)
    points = []
    for k in range(max_lag + 1):
        num = float(centered[k:] @ centered[: n - k])
        points.append(CorrelogramPoint(lag=k, value=num / denom, confidence_bound=bound))
    return points


def pacf(y, max_lag: int) -> list[CorrelogramPoint]:
    """Partial autocorrelations at lags 1..max_lag via Durbin-Levinson."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if max_lag >= n / 2:
        raise ValueError(f"max_lag {max_lag} must be < n/2 = {n / 2}")
    rho = np.array([p.value for p in acf(y, max_lag)])
    bound = 1.96 / np.sqrt(n)
    phi = np.zeros((max_lag + 1, max_lag + 1))
    v = 1.0
    points = []
    for k in range(1, max_lag + 1):
        if k == 1:
            phi[1, 1] = rho[1]
        else:
            num = rho[k] - phi[k - 1, 1:k] @ rho[k - 1 : 0 : -1]
            phi[k, k] = num / v
            phi[k, 1:k] = phi[k - 1, 1:k] - phi[k, k] * phi[k - 1, k - 1 : 0 : -1]
        v *= 1.0 - phi[k, k] ** 2
        if v <= 0:
            raise ValueError(f"autocovariance sequence numerically singular at lag {k}")
        points.append(CorrelogramPoint(lag=k, value=phi[k, k], confidence_bound=bound))
    return points


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Least squares fit returning (beta, t-ratios, residual variance)."""
    beta, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise ValueError("singular regression in ADF test")
    resid = y - x @ beta
    dof = x.shape[0] - x.shape[1]
    if dof <= 0:
        raise ValueError("ADF regression has no residual degrees of freedom")
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(x.T @ x)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = beta / se
    return beta, t, sigma2


def _adf_design(y: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Regressors (1, y_{t-1}, dy_{t-1}..dy_{t-k}) and response dy_t."""
    dy = np.diff(y)
    rows = dy.size - k
    response = dy[k:]
    cols = [np.ones(rows), y[k:-1]]
    for j in range(1, k + 1):
        cols.append(dy[k - j : dy.size - j])
    return np.column_stack(cols), response


def adf_test(y, max_lags: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller test with a constant term.

    The starting lag count follows the Schwert rule floor(12*(n/100)^0.25)
    and is trimmed backward while the terminal lag coefficient is
    insignificant (|t| < 1.645). The statistic is the t-ratio on the lagged
    level, compared against the finite-sample MacKinnon 5% critical value.
    A constant series short-circuits to rejection (no unit root to find,
    and the regression would be singular).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 20:
        raise ValueError("ADF test requires at least 20 observations")
    crit = _critical_value(n - 1)
    if np.ptp(y) == 0.0:
        return AdfResult(statistic=-np.inf, lags_used=0,
                         critical_value_5pct=crit, reject_unit_root=True)
    if max_lags is None:
        max_lags = int(np.floor(12.0 * (n / 100.0) ** 0.25))
    max_lags = max(0, min(max_lags, n // 2 - 3))

    k = max_lags
    while k > 0:
        x, resp = _adf_design(y, k)
        _, t, _ = _ols(x, resp)
        if abs(t[-1]) >= 1.6449:
            break
        k -= 1
    x, resp = _adf_design(y, k)
    _, t, _ = _ols(x, resp)
    stat = float(t[1])
    crit = _critical_value(x.shape[0])
    return AdfResult(statistic=stat, lags_used=k,
                     critical_value_5pct=crit, reject_unit_root=stat < crit)


def _critical_value(nobs: int) -> float:
    c0, c1, c2, c3 = _MACKINNON_5PCT_CONST
    return c0 + c1 / nobs + c2 / nobs**2 + c3 / nobs**3
