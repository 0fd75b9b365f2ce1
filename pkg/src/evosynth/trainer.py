"""Small numpy engine for masked sequential conv nets.

Convolutions are 'valid' with stride 1, pooling is non-overlapping max
pooling, and the loss is mean softmax cross-entropy.  Optimization is SGD with
momentum.  Gradients at dead coordinates are zeroed, so masked weights stay
exactly 0 throughout training.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DivergenceError, ShapeError
from .network import NetworkGenome, cluster_alive

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 64
    epochs: int = 3
    weight_decay: float = 0.0
    init: str = "he_uniform"
    eval_batch_size: int = 1000

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError("trainer.learning_rate", "must be >= 0")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError("trainer.momentum", "must lie in [0, 1)")
        if self.batch_size < 1:
            raise ConfigError("trainer.batch_size", "must be >= 1")
        if self.epochs < 0:
            raise ConfigError("trainer.epochs", "must be >= 0")
        if self.weight_decay < 0:
            raise ConfigError("trainer.weight_decay", "must be >= 0")
        if self.init not in ("he_uniform", "lecun_uniform"):
            raise ConfigError("trainer.init", f"unknown initialization scheme {self.init!r}")


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    loss: float
    samples: int


# -- layer primitives ---------------------------------------------------------

def _conv_forward(x, w, b):
    n, c, h, wd = x.shape
    f, _, k, _ = w.shape
    ho, wo = h - k + 1, wd - k + 1
    cols = sliding_window_view(x, (k, k), axis=(2, 3)).transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    out = cols @ w.reshape(f, -1).T + b
    return out.reshape(n, ho, wo, f).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, x_shape, w, cols, need_dx):
    n, c, h, wd = x_shape
    f, _, k, _ = w.shape
    ho, wo = h - k + 1, wd - k + 1
    d2 = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (d2.T @ cols).reshape(w.shape)
    db = d2.sum(axis=0)
    if not need_dx:
        return None, dw, db
    dcols = (d2 @ w.reshape(f, -1)).reshape(n, ho, wo, c, k, k)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + ho, j:j + wo] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx, dw, db


def _pool_forward(x, s):
    n, c, h, wd = x.shape
    ho, wo = h // s, wd // s
    xr = x[:, :, :ho * s, :wo * s].reshape(n, c, ho, s, wo, s).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, s * s)
    arg = xr.argmax(axis=-1)
    out = np.take_along_axis(xr, arg[..., None], axis=-1)[..., 0]
    return out, arg


def _pool_backward(dout, x_shape, s, arg):
    n, c, h, wd = x_shape
    ho, wo = h // s, wd // s
    dxr = np.zeros((n, c, ho, wo, s * s), dtype=dout.dtype)
    np.put_along_axis(dxr, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :, :ho * s, :wo * s] = dxr.reshape(n, c, ho, wo, s, s).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * s, wo * s)
    return dx


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _params(genome: NetworkGenome, dtype):
    ws = [None if w is None else w.astype(dtype) for w in genome.weights]
    bs = [None if b is None else b.astype(dtype) for b in genome.biases]
    return ws, bs


def _run_forward(layers, ws, bs, x):
    caches = []
    for spec, w, b in zip(layers, ws, bs):
        if spec.kind == "conv":
            out, cols = _conv_forward(x, w, b)
            caches.append((x.shape, cols))
        elif spec.kind == "pool":
            out, arg = _pool_forward(x, spec.window)
            caches.append((x.shape, arg))
        elif spec.kind == "dense":
            flat = x.reshape(x.shape[0], -1)
            out = flat @ w.T + b
            caches.append((x.shape, flat))
        else:
            out = np.maximum(x, 0) if spec.activation == "relu" else np.tanh(x)
            caches.append((x.shape, out))
        x = out
    return x, caches


def _run_backward(layers, ws, caches, dlogits):
    n = len(layers)
    gw, gb = [None] * n, [None] * n
    d = dlogits
    for i in range(n - 1, -1, -1):
        spec, w = layers[i], ws[i]
        shape, cache = caches[i]
        need_dx = i > 0
        if spec.kind == "conv":
            d, gw[i], gb[i] = _conv_backward(d, shape, w, cache, need_dx)
        elif spec.kind == "pool":
            d = _pool_backward(d, shape, spec.window, cache)
        elif spec.kind == "dense":
            gw[i] = d.T @ cache
            gb[i] = d.sum(axis=0)
            d = (d @ w).reshape(shape) if need_dx else None
        else:
            d = d * (cache > 0) if spec.activation == "relu" else d * (1.0 - cache * cache)
    return gw, gb


def _check_batch(genome, x):
    if x.shape[1:] != genome.input_shape:
        raise ShapeError(f"batch samples have shape {x.shape[1:]}, network expects {genome.input_shape}")


def forward(genome: NetworkGenome, batch, dtype=np.float32) -> np.ndarray:
    """Class probabilities, shape (N, class_count)."""
    x = np.asarray(batch, dtype=dtype)
    if x.ndim == len(genome.input_shape):
        x = x[None]
    _check_batch(genome, x)
    ws, bs = _params(genome, dtype)
    logits, _ = _run_forward(genome.layers, ws, bs, x)
    return _softmax(logits)


def loss_and_gradients(genome: NetworkGenome, x, y, dtype=np.float64):
    """Mean cross-entropy and masked gradients (lists aligned with layers)."""
    x = np.asarray(x, dtype=dtype)
    _check_batch(genome, x)
    y = np.asarray(y)
    ws, bs = _params(genome, dtype)
    logits, caches = _run_forward(genome.layers, ws, bs, x)
    probs = _softmax(logits)
    n = x.shape[0]
    loss = float(-np.log(np.maximum(probs[np.arange(n), y], 1e-300)).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    gw, gb = _run_backward(genome.layers, ws, caches, dlogits)
    for i in genome.weighted_layers:
        gw[i] = gw[i] * genome.masks[i]
        gb[i] = gb[i] * cluster_alive(genome, i)
    return loss, gw, gb


def evaluate(genome: NetworkGenome, x, y, batch_size=1000) -> EvalResult:
    n = len(y)
    if n == 0:
        raise ValueError("cannot evaluate on an empty split")
    correct, loss = 0, 0.0
    for start in range(0, n, batch_size):
        p = forward(genome, x[start:start + batch_size])
        yy = y[start:start + batch_size]
        correct += int((p.argmax(axis=1) == yy).sum())
        loss += float(-np.log(np.maximum(p[np.arange(len(yy)), yy], 1e-30)).sum())
    return EvalResult(correct / n, loss / n, n)


def train(genome: NetworkGenome, dataset, config: TrainerConfig, seed: int,
          epochs: Optional[int] = None, train_split="train", test_split="test"):
    """Mini-batch SGD on the alive synapses.

    Returns the trained genome and one test-split ``EvalResult`` per epoch.
    The shuffling stream is ``default_rng(seed)``.
    """
    epochs = config.epochs if epochs is None else epochs
    x, y = dataset.split(train_split)
    xt, yt = dataset.split(test_split)
    rng = np.random.default_rng(seed)
    idx = genome.weighted_layers
    ws = [w.copy() if w is not None else None for w in genome.weights]
    bs = [b.copy() if b is not None else None for b in genome.biases]
    masks = {i: genome.masks[i].astype(np.float32) for i in idx}
    bias_masks = {i: cluster_alive(genome, i).astype(np.float32) for i in idx}
    vw = {i: np.zeros_like(ws[i]) for i in idx}
    vb = {i: np.zeros_like(bs[i]) for i in idx}
    lr, mu, wd = np.float32(config.learning_rate), np.float32(config.momentum), np.float32(config.weight_decay)
    history = []
    current = genome
    for epoch in range(epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(order), config.batch_size):
            bi = order[start:start + config.batch_size]
            xb, yb = x[bi], y[bi]
            logits, caches = _run_forward(genome.layers, ws, bs, xb)
            probs = _softmax(logits)
            n = len(yb)
            loss = -np.log(np.maximum(probs[np.arange(n), yb], 1e-30)).mean()
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch starting {start}; "
                                      f"lower trainer.learning_rate (currently {config.learning_rate})")
            dlogits = probs
            dlogits[np.arange(n), yb] -= 1.0
            dlogits /= n
            gw, gb = _run_backward(genome.layers, ws, caches, dlogits)
            for i in idx:
                g = (gw[i] + wd * ws[i]) * masks[i]
                vw[i] = mu * vw[i] - lr * g
                ws[i] = (ws[i] + vw[i]) * masks[i]
                vb[i] = mu * vb[i] - lr * gb[i] * bias_masks[i]
                bs[i] = (bs[i] + vb[i]) * bias_masks[i]
        current = genome.replace(weights=tuple(ws), biases=tuple(bs))
        result = evaluate(current, xt, yt, config.eval_batch_size)
        log.debug("epoch %d: test accuracy %.4f loss %.4f", epoch + 1, result.accuracy, result.loss)
        history.append(result)
    return current, history


class Trainer:
    """Binds a dataset and config; the handle used by the generation loop."""

    def __init__(self, dataset, config: TrainerConfig, train_split="train", test_split="test"):
        self.dataset = dataset
        self.config = config
        self.train_split = train_split
        self.test_split = test_split

    def train(self, genome, seed, epochs=None):
        return train(genome, self.dataset, self.config, seed, epochs, self.train_split, self.test_split)

    def retrain(self, genome, seed, epochs):
        trained, _ = self.train(genome, seed, epochs)
        return trained

    def evaluate(self, genome) -> EvalResult:
        x, y = self.dataset.split(self.test_split)
        return evaluate(genome, x, y, self.config.eval_batch_size)


@dataclass(frozen=True)
class GradientCheckReport:
    passed: bool
    max_relative_error: float
    checked: int
    tolerance: float


GradFn = Callable[[NetworkGenome, np.ndarray, np.ndarray], tuple]


def relative_error(a, b, floor=1e-6):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def gradient_check(genome: NetworkGenome, sample, tolerance=1e-3, step=1e-4,
                   grad_fn: Optional[GradFn] = None) -> GradientCheckReport:
    """Compare analytic gradients with central differences on every alive weight and bias.

    ``sample`` is ``(x, y)``.  ``grad_fn`` replaces the analytic gradient (used
    to check that a broken backward rule is caught).  Relative errors use a
    denominator floor of 1e-6.
    """
    x, y = sample
    x = np.asarray(x, dtype=np.float64)
    _, gw, gb = (grad_fn or loss_and_gradients)(genome, x, y)
    ws, bs = _params(genome, np.float64)

    def loss_at():
        logits, _ = _run_forward(genome.layers, ws, bs, x)
        p = _softmax(logits)
        return float(-np.log(p[np.arange(len(y)), y]).mean())

    worst, checked = 0.0, 0
    for i in genome.weighted_layers:
        targets = [(ws[i], gw[i], np.argwhere(genome.masks[i])),
                   (bs[i], gb[i], np.argwhere(cluster_alive(genome, i)))]
        for arr, grad, coords in targets:
            for c in map(tuple, coords):
                old = arr[c]
                arr[c] = old + step
                up = loss_at()
                arr[c] = old - step
                down = loss_at()
                arr[c] = old
                numeric = (up - down) / (2 * step)
                worst = max(worst, float(relative_error(grad[c], numeric)))
                checked += 1
    return GradientCheckReport(worst <= tolerance, worst, checked, tolerance)
