"""Minimal trainable LSTM regressor for one-step-ahead sequence prediction.

The cell follows the standard gate equations (logistic gates, tanh
candidate, elementwise products); the dense output head is affine followed
by a rectifier. Training is full backpropagation through time with Adam,
seeded minibatch shuffling, inverted dropout on the final hidden vector,
and global gradient-norm clipping. Everything runs in float64 numpy, so a
fixed seed gives bit-identical weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import stream_rng


def _sigmoid(z):
    # tanh-based logistic: numpy's tanh is SIMD-vectorized, so this is far
    # faster than scipy's expit at these batch sizes.
    return 0.5 * (np.tanh(0.5 * z) + 1.0)

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8
_CLIP_NORM = 5.0


@dataclass(frozen=True)
class LstmConfig:
    hidden_size: int = 128
    window: int = 10
    learning_rate: float = 0.001
    epochs: int = 200
    batch_size: int = 32
    dropout: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size < 1 or self.window < 1:
            raise ValueError("hidden_size and window must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


class LstmModel:
    """Gate weights, output head, and target normalization statistics.

    The four gate matrices are stored stacked as `w_stack` of shape
    (4*hidden, hidden + input) in forget/input/candidate/output order;
    `W_f`, `W_i`, `W_c`, `W_o` (and the matching biases) are views into it.
    """

    def __init__(self, config: LstmConfig, input_size: int = 1,
                 rng: np.random.Generator | None = None,
                 dtype: np.dtype = np.float64):
        self.config = config
        self.input_size = input_size
        self.dtype = np.dtype(dtype)
        h, cat = config.hidden_size, config.hidden_size + input_size
        if rng is None:
            rng = stream_rng(config.seed, "lstm-init")
        bound = 1.0 / np.sqrt(cat)
        self.w_stack = rng.uniform(-bound, bound, size=(4 * h, cat)).astype(self.dtype)
        self.b_stack = np.zeros(4 * h, dtype=self.dtype)
        self.b_stack[:h] = 1.0  # forget-gate bias favors carrying state
        self.w_out = rng.uniform(-1.0 / np.sqrt(h), 1.0 / np.sqrt(h), size=h).astype(self.dtype)
        self.b_out = 0.5
        self.t_min = 0.0
        self.t_max = 1.0
        self.loss_history: list[float] = []

    def _gate(self, k: int):
        h = self.config.hidden_size
        return self.w_stack[k * h :(k + 1) * h], self.b_stack[k * h : (k + 1) * h]

    @property
    def W_f(self):  # noqa: N802 - conventional gate names
        return self._gate(0)[0]

    @property
    def b_f(self):  # noqa: N802
        return self._gate(0)[1]

    @property
    def W_i(self):  # noqa: N802
        return self._gate(1)[0]

    @property
    def b_i(self):  # noqa: N802
        return self._gate(1)[1]

    @property
    def W_c(self):  # noqa: N802
        return self._gate(2)[0]

    @property
    def b_c(self):  # noqa: N802
        return self._gate(2)[1]

    @property
    def W_o(self):  # noqa: N802
        return self._gate(3)[0]

    @property
    def b_o(self):  # noqa: N802
        return self._gate(3)[1]

    @property
    def norm_scale(self) -> float:
        span = self.t_max - self.t_min
        return span if span > 1e-12 else 1.0

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.t_min) / self.norm_scale

    def denormalize(self, x):
        return np.asarray(x, dtype=float) * self.norm_scale + self.t_min


def cell_step(model: LstmModel, x, h_prev, c_prev):
    """One gate update: returns (h, c, gate_trace).

    Accepts single vectors or batches (leading batch axis). The trace keeps
    every intermediate activation for the backward pass.
    """
    x = np.asarray(x, dtype=model.dtype)
    h_prev = np.asarray(h_prev, dtype=model.dtype)
    c_prev = np.asarray(c_prev, dtype=model.dtype)
    single = x.ndim == 1 and h_prev.ndim == 1
    x = np.atleast_2d(x)
    h_prev = np.atleast_2d(h_prev)
    c_prev = np.atleast_2d(c_prev)
    hsz = model.config.hidden_size
    if x.shape[-1] != model.input_size or h_prev.shape[-1] != hsz or c_prev.shape[-1] != hsz:
        raise ValueError(
            f"dimension mismatch: x {x.shape}, h {h_prev.shape}, c {c_prev.shape} "
            f"for hidden={hsz}, input={model.input_size}"
        )
    a = np.concatenate([h_prev, x], axis=-1)
    z = a @ model.w_stack.T
    z += model.b_stack
    f = _sigmoid(z[:, :hsz])
    i = _sigmoid(z[:, hsz : 2 * hsz])
    g = np.tanh(z[:, 2 * hsz : 3 * hsz])
    o = _sigmoid(z[:, 3 * hsz :])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h = o * tanh_c
    trace = {"a": a, "f": f, "i": i, "g": g, "o": o,
             "c_prev": c_prev, "c": c, "tanh_c": tanh_c}
    if single:
        return h[0], c[0], trace
    return h, c, trace


def _forward_batch(model: LstmModel, windows: np.ndarray, dropout_mask=None):
    """Run the cell over each window column; returns (pred, cache)."""
    b, t = windows.shape
    hsz = model.config.hidden_size
    h = np.zeros((b, hsz), dtype=model.dtype)
    c = np.zeros((b, hsz), dtype=model.dtype)
    traces = []
    for step in range(t):
        h, c, tr = cell_step(model, windows[:, step : step + 1], h, c)
        traces.append(tr)
    h_head = h if dropout_mask is None else h * dropout_mask
    z_out = h_head @ model.w_out + model.b_out
    pred = np.maximum(z_out, 0.0)
    cache = {"traces": traces, "h_head": h_head, "z_out": z_out,
             "mask": dropout_mask, "pred": pred}
    return pred, cache


def _backward_batch(model: LstmModel, cache, dpred: np.ndarray):
    """BPTT through the cached forward pass; returns parameter gradients."""
    hsz = model.config.hidden_size
    traces = cache["traces"]
    dz_out = dpred * (cache["z_out"] > 0)
    d_w_out = cache["h_head"].T @ dz_out
    d_b_out = float(dz_out.sum())
    dh = np.outer(dz_out, model.w_out)
    if cache["mask"] is not None:
        dh = dh * cache["mask"]
    dc = np.zeros_like(dh)
    d_w = np.zeros_like(model.w_stack)
    d_b = np.zeros_like(model.b_stack)
    for tr in reversed(traces):
        do = dh * tr["tanh_c"]
        dc = dc + dh * tr["o"] * (1.0 - tr["tanh_c"] ** 2)
        df = dc * tr["c_prev"]
        di = dc * tr["g"]
        dg = dc * tr["i"]
        dz = np.concatenate(
            [
                df * tr["f"] * (1.0 - tr["f"]),
                di * tr["i"] * (1.0 - tr["i"]),
                dg * (1.0 - tr["g"] ** 2),
                do * tr["o"] * (1.0 - tr["o"]),
            ],
            axis=1,
        )
        d_w += dz.T @ tr["a"]
        d_b += dz.sum(axis=0)
        da = dz @ model.w_stack
        dh = da[:, :hsz]
        dc = dc * tr["f"]
    return d_w, d_b, d_w_out, d_b_out


def batch_loss_and_grads(model: LstmModel, windows: np.ndarray, targets: np.ndarray,
                         dropout_mask=None):
    """Mean squared error over a batch and its analytic parameter gradients.

    Used by the trainer and by gradient-verification tests; inputs are on
    the model's normalized scale.
    """
    pred, cache = _forward_batch(model, windows, dropout_mask)
    err = pred - targets
    loss = float(np.mean(err**2))
    dpred = 2.0 * err / err.size
    grads = _backward_batch(model, cache, dpred)
    return loss, grads


def forward(model: LstmModel, window, dropout_mask=None) -> float:
    """Prediction for one window on the normalized scale."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 1 or window.size != model.config.window:
        raise ValueError(
            f"window length {window.size} does not match config window "
            f"{model.config.window}"
        )
    pred, _ = _forward_batch(model, window[None, :], dropout_mask)
    return float(pred[0])


def train(series, config: LstmConfig) -> LstmModel:
    """Fit the regressor to one-step-ahead prediction of `series`.

    Targets are min-max normalized to [0, 1] using the training values
    only; supervised pairs are sliding windows of length `config.window`
    against the following value.
    """
    values = np.asarray(getattr(series, "values", series), dtype=float)
    if values.ndim != 1 or values.size <= config.window + 1:
        raise ValueError(
            f"need more than window+1 = {config.window + 1} points, got {values.size}"
        )
    # Training runs in float32: the halved memory traffic roughly doubles
    # throughput and one-step regression needs nowhere near 1e-7 precision.
    model = LstmModel(config, dtype=np.float32)
    model.t_min = float(values.min())
    model.t_max = float(values.max())
    norm = model.normalize(values).astype(model.dtype)
    windows = np.lib.stride_tricks.sliding_window_view(norm, config.window)[:-1].copy()
    targets = norm[config.window :]
    m = targets.size

    rng = stream_rng(config.seed, "lstm-train")
    shapes = [model.w_stack, model.b_stack, model.w_out, np.zeros(1)]
    adam_m = [np.zeros_like(s) for s in shapes]
    adam_v = [np.zeros_like(s) for s in shapes]
    step = 0
    keep = 1.0 - config.dropout

    for epoch in range(config.epochs):
        perm = rng.permutation(m)
        epoch_loss = 0.0
        for lo in range(0, m, config.batch_size):
            batch = perm[lo : lo + config.batch_size]
            mask = None
            if config.dropout > 0:
                mask = ((rng.random((batch.size, config.hidden_size)) < keep) / keep
                        ).astype(model.dtype)
            loss, grads = batch_loss_and_grads(
                model, windows[batch], targets[batch], dropout_mask=mask
            )
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite training loss at epoch {epoch}, batch offset {lo}"
                )
            epoch_loss += loss * batch.size
            d_w, d_b, d_w_out, d_b_out = grads
            gnorm = np.sqrt(
                np.sum(d_w**2) + np.sum(d_b**2) + np.sum(d_w_out**2) + d_b_out**2
            )
            if gnorm > _CLIP_NORM:
                scale = _CLIP_NORM / gnorm
                d_w, d_b, d_w_out, d_b_out = (
                    d_w * scale, d_b * scale, d_w_out * scale, d_b_out * scale,
                )
            step += 1
            params = [model.w_stack, model.b_stack, model.w_out]
            grads_list = [d_w, d_b, d_w_out]
            for k in range(3):
                adam_m[k] = _ADAM_BETA1 * adam_m[k] + (1 - _ADAM_BETA1) * grads_list[k]
                adam_v[k] = _ADAM_BETA2 * adam_v[k] + (1 - _ADAM_BETA2) * grads_list[k] ** 2
                mhat = adam_m[k] / (1 - _ADAM_BETA1**step)
                vhat = adam_v[k] / (1 - _ADAM_BETA2**step)
                params[k] -= config.learning_rate * mhat / (np.sqrt(vhat) + _ADAM_EPS)
            adam_m[3] = _ADAM_BETA1 * adam_m[3] + (1 - _ADAM_BETA1) * d_b_out
            adam_v[3] = _ADAM_BETA2 * adam_v[3] + (1 - _ADAM_BETA2) * d_b_out**2
            mhat = adam_m[3] / (1 - _ADAM_BETA1**step)
            vhat = adam_v[3] / (1 - _ADAM_BETA2**step)
            model.b_out -= float(config.learning_rate * mhat / (np.sqrt(vhat) + _ADAM_EPS))
        model.loss_history.append(epoch_loss / m)
    return model


def forecast_trend(model: LstmModel, history, horizon: int) -> np.ndarray:
    """Autoregressive rollout: each prediction feeds the next window."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    history = np.asarray(getattr(history, "values", history), dtype=float)
    window = model.config.window
    if history.size < window:
        raise ValueError(f"history shorter than window {window}")
    buf = list(model.normalize(history[-window:]))
    out = np.empty(horizon)
    for h in range(horizon):
        pred = forward(model, np.array(buf[-window:]))
        buf.append(pred)
        out[h] = pred
    return model.denormalize(out)


_WEIGHTS_FORMAT = "tricast-lstm-v1"


def save_weights(model: LstmModel, path) -> None:
    """Write weights as a zip of .npy tensors (shape headers included)."""
    cfg = model.config
    np.savez(
        Path(path),
        format=np.array(_WEIGHTS_FORMAT),
        w_stack=model.w_stack, b_stack=model.b_stack,
        w_out=model.w_out, b_out=np.array(model.b_out),
        t_min=np.array(model.t_min), t_max=np.array(model.t_max),
        config=np.array([cfg.hidden_size, cfg.window, cfg.learning_rate,
                         cfg.epochs, cfg.batch_size, cfg.dropout, cfg.seed]),
        input_size=np.array(model.input_size),
    )


def load_weights(path) -> LstmModel:
    with np.load(Path(path), allow_pickle=False) as data:
        if str(data["format"]) != _WEIGHTS_FORMAT:
            raise ValueError(f"unrecognized weights format {data['format']!r}")
        raw = data["config"]
        config = LstmConfig(
            hidden_size=int(raw[0]), window=int(raw[1]), learning_rate=float(raw[2]),
            epochs=int(raw[3]), batch_size=int(raw[4]), dropout=float(raw[5]),
            seed=int(raw[6]),
        )
        model = LstmModel(config, input_size=int(data["input_size"]),
                          dtype=data["w_stack"].dtype)
        model.w_stack[:] = data["w_stack"]
        model.b_stack[:] = data["b_stack"]
        model.w_out[:] = data["w_out"]
        model.b_out = float(data["b_out"])
        model.t_min = float(data["t_min"])
        model.t_max = float(data["t_max"])
    return model
