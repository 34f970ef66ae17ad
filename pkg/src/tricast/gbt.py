"""Second-order gradient-boosted regression trees on lag/rolling features.

Squared-error loss gives per-sample gradient g = prediction - target and
hessian h = 1, so split gain and leaf weights take the closed regularized
forms gain = 0.5*(GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)) -
gamma and w = -G/(H+lambda). Split search is exact greedy enumeration over
sorted feature values; no histogram approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .seeding import stream_rng
from .series import TimeSeries

LAG_STEPS = (1, 2, 3, 24, 48, 168)
ROLL_WINDOWS = (3, 24, 168)
MIN_HISTORY = max(LAG_STEPS)

FEATURE_COLUMNS = tuple(
    [f"lag_{k}" for k in LAG_STEPS]
    + [f"rollmean_{w}" for w in ROLL_WINDOWS]
    + [f"rollstd_{w}" for w in ROLL_WINDOWS]
    + ["hour_of_day", "day_of_week", "is_weekend"]
)


@dataclass(frozen=True)
class GbtConfig:
    n_trees: int = 1000
    learning_rate: float = 0.05
    max_depth: int = 6
    subsample: float = 0.8
    colsample: float = 0.8
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1 or self.n_trees < 0:
            raise ValueError("max_depth >= 1 and n_trees >= 0 required")
        if not 0.0 < self.subsample <= 1.0 or not 0.0 < self.colsample <= 1.0:
            raise ValueError("subsample and colsample must lie in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0:
            raise ValueError("reg_lambda and gamma must be >= 0")


@dataclass(frozen=True)
class FeatureMatrix:
    """Rows aligned to series indices; `valid` marks rows with full history."""

    columns: tuple[str, ...]
    data: np.ndarray
    valid: np.ndarray


def _calendar_row(when: datetime) -> tuple[float, float, float]:
    wd = when.weekday()
    return float(when.hour), float(wd), float(wd >= 5)


def build_features(series: TimeSeries, target) -> FeatureMatrix:
    """Lag, trailing rolling-statistic, and calendar features for `target`.

    Rolling windows end at the previous index, so no feature at row t
    depends on target[t]. Rows with index < 168 lack full history and are
    marked invalid.
    """
    target = np.asarray(target, dtype=float)
    n = len(series)
    if target.shape != (n,):
        raise ValueError(f"target length {target.size} != series length {n}")
    if n <= MIN_HISTORY:
        raise ValueError(f"need at least {MIN_HISTORY + 1} points, got {n}")
    data = np.full((n, len(FEATURE_COLUMNS)), np.nan)
    col = 0
    for k in LAG_STEPS:
        data[k:, col] = target[:-k]
        col += 1
    for w in ROLL_WINDOWS:
        means = np.convolve(target, np.full(w, 1.0 / w), mode="valid")
        data[w:, col] = means[: n - w]
        col += 1
    for w in ROLL_WINDOWS:
        stds = np.lib.stride_tricks.sliding_window_view(target, w).std(axis=1, ddof=1)
        data[w:, col] = stds[: n - w]
        col += 1
    for t in range(n):
        data[t, col:] = _calendar_row(series.timestamp(t))
    valid = np.arange(n) >= MIN_HISTORY
    return FeatureMatrix(columns=FEATURE_COLUMNS, data=data, valid=valid)


def feature_row(history, when: datetime) -> np.ndarray:
    """Single feature row for the step following `history` at time `when`."""
    history = np.asarray(history, dtype=float)
    if history.size < MIN_HISTORY:
        raise ValueError(f"history must hold at least {MIN_HISTORY} values")
    row = np.empty(len(FEATURE_COLUMNS))
    col = 0
    for k in LAG_STEPS:
        row[col] = history[-k]
        col += 1
    for w in ROLL_WINDOWS:
        row[col] = history[-w:].mean()
        col += 1
    for w in ROLL_WINDOWS:
        row[col] = history[-w:].std(ddof=1)
        col += 1
    row[col:] = _calendar_row(when)
    return row


@dataclass
class RegressionTree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature >= 0))

    def predict(self, x: np.ndarray) -> np.ndarray:
        idx = np.zeros(x.shape[0], dtype=int)
        while True:
            active = self.feature[idx] >= 0
            if not active.any():
                return self.weight[idx]
            rows = np.flatnonzero(active)
            nodes = idx[rows]
            go_left = x[rows, self.feature[nodes]] < self.threshold[nodes]
            idx[rows] = np.where(go_left, self.left[nodes], self.right[nodes])

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf node index reached by each row."""
        idx = np.zeros(x.shape[0], dtype=int)
        while True:
            active = self.feature[idx] >= 0
            if not active.any():
                return idx
            rows = np.flatnonzero(active)
            nodes = idx[rows]
            go_left = x[rows, self.feature[nodes]] < self.threshold[nodes]
            idx[rows] = np.where(go_left, self.left[nodes], self.right[nodes])


@dataclass
class GbtModel:
    base_prediction: float
    trees: list[RegressionTree]
    config: GbtConfig
    feature_names: tuple[str, ...]
    degenerate: bool = False


def best_split(x, g, rows, cols, config):
    """Exact greedy (feature, threshold, gain) over the given rows.

    Ties break toward the lower feature index, then the lower threshold.
    Returns None when no candidate clears min_child_weight or all values
    coincide.
    """
    lam = config.reg_lambda
    g_node = g[rows]
    total_g = g_node.sum()
    total_h = float(rows.size)
    parent = total_g**2 / (total_h + lam)
    best = None
    for f in cols:
        v = x[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        gs = np.cumsum(g_node[order])[:-1]
        hs = np.arange(1, rows.size, dtype=float)
        ok = (vs[1:] != vs[:-1]) & (hs >= config.min_child_weight) & (
            total_h - hs >= config.min_child_weight
        )
        if not ok.any():
            continue
        gains = 0.5 * (
            gs**2 / (hs + lam)
            + (total_g - gs) ** 2 / (total_h - hs + lam)
            - parent
        ) - config.gamma
        gains[~ok] = -np.inf
        pos = int(np.argmax(gains))  # first max: lowest threshold wins ties
        if best is None or gains[pos] > best[0]:
            thr = 0.5 * (vs[pos] + vs[pos + 1])
            if thr <= vs[pos]:  # guard midpoint rounding onto the left value
                thr = np.nextafter(vs[pos], vs[pos + 1])
            best = (float(gains[pos]), int(f), float(thr))
    return best


def _grow_tree(x, g, rows, cols, config) -> RegressionTree:
    feature, threshold, left, right, weight = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        weight.append(0.0)
        return len(feature) - 1

    def build(node_rows, depth) -> int:
        node = new_node()
        total_g = g[node_rows].sum() if node_rows.size else 0.0
        total_h = float(node_rows.size)
        found = None
        if depth < config.max_depth and node_rows.size >= 2:
            found = best_split(x, g, node_rows, cols, config)
        if found is None or found[0] <= 0.0:
            weight[node] = -total_g / (total_h + config.reg_lambda)
            return node
        _, f, thr = found
        feature[node] = f
        threshold[node] = thr
        mask = x[node_rows, f] < thr
        left[node] = build(node_rows[mask], depth + 1)
        right[node] = build(node_rows[~mask], depth + 1)
        return node

    build(rows, 0)
    return RegressionTree(
        feature=np.array(feature, dtype=int),
        threshold=np.array(threshold),
        left=np.array(left, dtype=int),
        right=np.array(right, dtype=int),
        weight=np.array(weight),
    )


def fit(features: FeatureMatrix, targets, config: GbtConfig) -> GbtModel:
    """Boost `config.n_trees` rounds against the valid feature rows."""
    targets = np.asarray(targets, dtype=float)
    if targets.size != features.data.shape[0]:
        raise ValueError("targets must align with the feature matrix rows")
    if not np.all(np.isfinite(targets[features.valid])):
        raise ValueError("targets contain non-finite values on valid rows")
    x = features.data[features.valid]
    y = targets[features.valid]
    m, k = x.shape
    if m < 2:
        raise ValueError("need at least 2 valid rows to fit")
    base = float(y.mean())
    preds = np.full(m, base)
    rng = stream_rng(config.seed, "gbt-train")
    n_cols = max(1, int(round(config.colsample * k)))
    trees: list[RegressionTree] = []
    for _ in range(config.n_trees):
        if config.subsample < 1.0:
            row_mask = rng.random(m) < config.subsample
            rows = np.flatnonzero(row_mask)
            if rows.size < 2:
                rows = np.arange(m)
        else:
            rows = np.arange(m)
        if config.colsample < 1.0:
            cols = np.sort(rng.choice(k, size=n_cols, replace=False))
        else:
            cols = np.arange(k)
        g = preds - y
        tree = _grow_tree(x, g, rows, cols, config)
        trees.append(tree)
        preds += config.learning_rate * tree.predict(x)
    degenerate = config.n_trees > 0 and all(t.n_splits == 0 for t in trees)
    return GbtModel(
        base_prediction=base, trees=trees, config=config,
        feature_names=features.columns, degenerate=degenerate,
    )


def _feature_array(model: GbtModel, features) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        if features.columns != model.feature_names:
            raise ValueError(
                f"feature schema mismatch: model expects {model.feature_names}, "
                f"got {features.columns}"
            )
        return features.data
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != len(model.feature_names):
        raise ValueError(
            f"feature schema mismatch: expected {len(model.feature_names)} columns, "
            f"got {x.shape[1]}"
        )
    return x


def predict(model: GbtModel, features, n_rounds: int | None = None) -> np.ndarray:
    """base + eta * sum of tree outputs, optionally truncated to n_rounds."""
    x = _feature_array(model, features)
    trees = model.trees if n_rounds is None else model.trees[:n_rounds]
    out = np.full(x.shape[0], model.base_prediction)
    for tree in trees:
        out += model.config.learning_rate * tree.predict(x)
    return out


def forecast_residual(model: GbtModel, series: TimeSeries, residual_history,
                      horizon: int) -> np.ndarray:
    """Autoregressive rollout: each prediction joins the lag history."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    history = list(np.asarray(residual_history, dtype=float))
    if len(history) < MIN_HISTORY:
        raise ValueError(f"residual history must hold at least {MIN_HISTORY} values")
    start = len(history)
    out = np.empty(horizon)
    for step in range(horizon):
        row = feature_row(np.asarray(history), series.timestamp(start + step))
        value = float(predict(model, row[None, :])[0])
        out[step] = value
        history.append(value)
    return out


def dump_model(model: GbtModel) -> str:
    """Readable tree list: one line per node, stable float formatting."""
    lines = [f"base={model.base_prediction:.17g} eta={model.config.learning_rate:.17g}"]
    for t, tree in enumerate(model.trees):
        lines.append(f"tree {t}:")
        for j in range(tree.feature.size):
            if tree.feature[j] < 0:
                lines.append(f"  {j}: leaf weight={tree.weight[j]:.17g}")
            else:
                name = model.feature_names[tree.feature[j]]
                lines.append(
                    f"  {j}: [{name} < {tree.threshold[j]:.17g}] "
                    f"yes={tree.left[j]} no={tree.right[j]}"
                )
    return "\n".join(lines) + "\n"
