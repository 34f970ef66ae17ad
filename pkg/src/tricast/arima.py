"""ARIMA(p,d,q) estimation and recursive forecasting.

Parameters are estimated by minimizing the conditional sum of squares of
the one-step innovations (presample innovations fixed at zero), refined
with a Nelder-Mead simplex from a Hannan-Rissanen starting point, and
projected into the stationary/invertible region by root reflection. The
constant term is estimated only for d = 0; differenced models are fit
without drift, so ARIMA(0,1,0) forecasts the last observed value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

_MAX_ORDER = 10


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ValueError("orders must be non-negative")
        if self.p > _MAX_ORDER or self.q > _MAX_ORDER:
            raise ValueError(f"p and q are limited to {_MAX_ORDER}")

    def __str__(self) -> str:
        return f"({self.p},{self.d},{self.q})"


@dataclass(frozen=True)
class ArimaModel:
    """Fitted coefficients plus the training-tail state needed to forecast."""

    order: ArimaOrder
    mu: float
    phi: np.ndarray
    theta: np.ndarray
    sigma2: float
    n_obs: int
    residuals: np.ndarray = field(repr=False)
    w_tail: np.ndarray = field(repr=False)
    eps_tail: np.ndarray = field(repr=False)
    diff_lasts: np.ndarray = field(repr=False)
    converged: bool = True

    @property
    def aic(self) -> float:
        n_eff = self.residuals.size
        return n_eff * math.log(max(self.sigma2, 1e-300)) + 2.0 * (
            self.order.p + self.order.q + 1
        )


def _css_residuals(w: np.ndarray, mu: float, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Innovations eps_t for t >= p, conditioning on the first p values."""
    p, q = phi.size, theta.size
    n = w.size
    z = w[p:] - mu
    for i in range(1, p + 1):
        z = z - phi[i - 1] * w[p - i : n - i]
    if q == 0:
        return z
    return lfilter([1.0], np.r_[1.0, theta], z)


def _unpack(params: np.ndarray, order: ArimaOrder) -> tuple[float, np.ndarray, np.ndarray]:
    has_mu = order.d == 0
    mu = float(params[0]) if has_mu else 0.0
    off = 1 if has_mu else 0
    phi = np.asarray(params[off : off + order.p], dtype=float)
    theta = np.asarray(params[off + order.p : off + order.p + order.q], dtype=float)
    return mu, phi, theta


def _css(params: np.ndarray, w: np.ndarray, order: ArimaOrder) -> float:
    mu, phi, theta = _unpack(params, order)
    eps = _css_residuals(w, mu, phi, theta)
    out = float(eps @ eps)
    return out if math.isfinite(out) else 1e300


def _lagmat(x: np.ndarray, lags: int) -> np.ndarray:
    return np.column_stack([x[lags - j : x.size - j] for j in range(1, lags + 1)])


def _hannan_rissanen(w: np.ndarray, order: ArimaOrder) -> np.ndarray:
    """Long-AR residual regression for simplex starting values."""
    p, q = order.p, order.q
    has_mu = order.d == 0
    zeros = np.zeros((1 if has_mu else 0) + p + q)
    if has_mu:
        zeros[0] = w.mean() if p == 0 else 0.0
    if p + q == 0:
        return zeros
    m = min(w.size // 4, max(10, 2 * (p + q)))
    if m < 1 or w.size - m <= m + 2:
        return zeros
    try:
        x = np.column_stack([np.ones(w.size - m), _lagmat(w, m)])
        beta = np.linalg.lstsq(x, w[m:], rcond=None)[0]
        ehat = w[m:] - x @ beta  # residuals aligned to t = m .. n-1
        start = m + q
        rows = w.size - start
        if rows <= p + q + 2:
            return zeros
        cols = []
        if has_mu:
            cols.append(np.ones(rows))
        for i in range(1, p + 1):
            cols.append(w[start - i : w.size - i])
        for j in range(1, q + 1):
            cols.append(ehat[start - m - j : ehat.size - j])
        design = np.column_stack(cols)
        est = np.linalg.lstsq(design, w[start:], rcond=None)[0]
        if not np.all(np.isfinite(est)):
            return zeros
        if not has_mu:
            return est
        return est
    except np.linalg.LinAlgError:
        return zeros


def _stabilize_poly(c: np.ndarray, nudge: float = 1e-6) -> tuple[np.ndarray, bool]:
    """Reflect roots of 1 + c1 z + ... + ck z^k outside the unit circle.

    Roots essentially on the circle cannot be reflected, so they are pushed
    just outside instead.
    """
    k = c.size
    if k == 0 or not np.any(c):
        return c, False
    roots = np.roots(np.r_[c[::-1], 1.0])
    changed = False
    fixed = []
    for r in roots:
        m = abs(r)
        if m < 1.0 - 1e-9:
            r = r / (m * m)
            changed = True
        elif m < 1.0 + 1e-9:
            r = r / m * (1.0 + nudge)
            changed = True
        fixed.append(r)
    if not changed:
        return c, False
    poly = np.array([1.0 + 0.0j])
    for r in fixed:
        poly = np.convolve(poly, np.array([1.0, -1.0 / r]))
    out = np.zeros(k)
    out[: poly.size - 1] = poly[1:].real
    return out, True


def _project(params: np.ndarray, order: ArimaOrder) -> tuple[np.ndarray, bool]:
    mu, phi, theta = _unpack(params, order)
    new_phi, ar_changed = _stabilize_poly(-phi)
    new_theta, ma_changed = _stabilize_poly(theta)
    if not (ar_changed or ma_changed):
        return params, False
    pieces = ([mu] if order.d == 0 else []) + list(-new_phi) + list(new_theta)
    return np.array(pieces), True


def fit(y, order: ArimaOrder) -> ArimaModel:
    """Estimate an ARIMA model of the given order from a value sequence."""
    y = np.asarray(y, dtype=float)
    n = y.size
    p, d, q = order.p, order.d, order.q
    if p + q == 0 and d == 0:
        raise ValueError("trivial order (0,0,0): need p+q >= 1 or d >= 1")
    if n <= d + max(p, q) + 10:
        raise ValueError(f"series length {n} too short for order {order}")
    w = np.diff(y, n=d) if d else y.copy()

    dim = (1 if d == 0 else 0) + p + q
    converged = True
    if dim == 0:
        params = np.empty(0)
    else:
        x0 = _hannan_rissanen(w, order)
        x0, _ = _project(x0, order)
        res = minimize(
            _css, x0, args=(w, order), method="Nelder-Mead",
            options={"maxiter": 5000, "maxfev": 5000, "xatol": 1e-8, "fatol": 1e-10},
        )
        params, converged = res.x, bool(res.success)
        # Projection back into the admissible region, then a short polish
        # from the projected point (which stays inside in practice).
        for _ in range(2):
            projected, changed = _project(params, order)
            if not changed:
                break
            res = minimize(
                _css, projected, args=(w, order), method="Nelder-Mead",
                options={"maxiter": 2000, "maxfev": 2000, "xatol": 1e-8, "fatol": 1e-10},
            )
            params = res.x if _css(res.x, w, order) <= _css(projected, w, order) else projected

    mu, phi, theta = _unpack(params, order)
    eps = _css_residuals(w, mu, phi, theta)
    sigma2 = float(eps @ eps) / eps.size
    diff_lasts = np.array([np.diff(y, n=j)[-1] for j in range(d)]) if d else np.empty(0)
    return ArimaModel(
        order=order, mu=mu, phi=phi, theta=theta, sigma2=sigma2, n_obs=n,
        residuals=eps, w_tail=w[n - d - p :] if p else np.empty(0),
        eps_tail=eps[eps.size - q :] if q else np.empty(0),
        diff_lasts=diff_lasts, converged=converged,
    )


def forecast(model: ArimaModel, horizon: int) -> np.ndarray:
    """Iterate the ARMA recursion with future innovations set to zero,
    then integrate d times from the stored training tail."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    p, d, q = model.order.p, model.order.d, model.order.q
    w_hist = list(model.w_tail)
    eps_hist = list(model.eps_tail)
    out = np.empty(horizon)
    for h in range(1, horizon + 1):
        val = model.mu
        for i in range(1, p + 1):
            val += model.phi[i - 1] * w_hist[-i]
        for j in range(1, q + 1):
            k = h - 1 - j  # relative innovation index; negative means observed
            if k < 0 and -k <= len(eps_hist):
                val += model.theta[j - 1] * eps_hist[k]
        w_hist.append(val)
        out[h - 1] = val
    for j in range(d - 1, -1, -1):
        out = model.diff_lasts[j] + np.cumsum(out)
    return out


def one_step_insample(y, model: ArimaModel) -> tuple[np.ndarray, np.ndarray]:
    """(targets, predictions) on the differenced scale for the training data."""
    y = np.asarray(y, dtype=float)
    w = np.diff(y, n=model.order.d) if model.order.d else y
    targets = w[model.order.p :]
    return targets, targets - model.residuals


def select_order(y, candidates) -> ArimaOrder:
    """Fit each candidate and return the AIC minimizer.

    AIC = n*ln(sigma2) + 2*(p+q+1); ties break toward smaller p+q, then
    smaller p.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate set is empty")
    best: tuple[float, int, int] | None = None
    best_order = None
    failures = []
    for cand in candidates:
        try:
            model = fit(y, cand)
        except (ValueError, np.linalg.LinAlgError) as exc:
            failures.append(f"{cand}: {exc}")
            continue
        key = (model.aic, cand.p + cand.q, cand.p)
        if best is None or key < best:
            best, best_order = key, cand
    if best_order is None:
        raise ValueError("all candidate orders failed to fit: " + "; ".join(failures))
    return best_order


def default_order_grid() -> tuple[ArimaOrder, ...]:
    """p, q in 0..3 and d in {0, 1}, excluding the trivial (0,0,0)."""
    grid = []
    for d in (0, 1):
        for p in range(4):
            for q in range(4):
                if p + q == 0 and d == 0:
                    continue
                grid.append(ArimaOrder(p, d, q))
    return tuple(grid)


def to_json(model: ArimaModel) -> str:
    """Flat text record of the model and its forecasting state."""
    rec = {
        "format": "tricast-arima-v1",
        "p": model.order.p, "d": model.order.d, "q": model.order.q,
        "mu": model.mu,
        "phi": model.phi.tolist(),
        "theta": model.theta.tolist(),
        "sigma2": model.sigma2,
        "n_obs": model.n_obs,
        "converged": model.converged,
        "w_tail": model.w_tail.tolist(),
        "eps_tail": model.eps_tail.tolist(),
        "diff_lasts": model.diff_lasts.tolist(),
        "residual_tail": model.residuals[-16:].tolist(),
    }
    return json.dumps(rec)


def from_json(text: str) -> ArimaModel:
    rec = json.loads(text)
    if rec.get("format") != "tricast-arima-v1":
        raise ValueError(f"unrecognized model record format {rec.get('format')!r}")
    return ArimaModel(
        order=ArimaOrder(rec["p"], rec["d"], rec["q"]),
        mu=rec["mu"], phi=np.array(rec["phi"]), theta=np.array(rec["theta"]),
        sigma2=rec["sigma2"], n_obs=rec["n_obs"],
        residuals=np.array(rec["residual_tail"]),
        w_tail=np.array(rec["w_tail"]), eps_tail=np.array(rec["eps_tail"]),
        diff_lasts=np.array(rec["diff_lasts"]), converged=rec["converged"],
    )
