"""Small 2-D CNN in numpy: conv(8) -> conv(16) -> conv(32) -> dense(64) -> K.

Tensors are batch-first, channels-last: ``(N, H, W, C)``. The input for K
users is a ``K x 2`` map (real, imaginary) with one channel. All arithmetic
is float64.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError

CONV_FILTERS = (8, 16, 32)
KERNEL = (2, 2)
HIDDEN = 64
PARAM_ORDER = (
    "conv1.w", "conv1.b",
    "conv2.w", "conv2.b",
    "conv3.w", "conv3.b",
    "dense1.w", "dense1.b",
    "out.w", "out.b",
)
FORMAT_VERSION = 1


@dataclass(eq=False)
class CnnModel:
    params: dict
    trained_K: int
    norm_mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    norm_std: np.ndarray = field(default_factory=lambda: np.ones(2))
    dropout_rate: float = 0.25
    version: int = FORMAT_VERSION

    def copy(self) -> "CnnModel":
        return CnnModel({k: v.copy() for k, v in self.params.items()}, self.trained_K,
                        self.norm_mean.copy(), self.norm_std.copy(), self.dropout_rate, self.version)

    def standardize(self, features) -> np.ndarray:
        return (np.asarray(features, float) - self.norm_mean) / self.norm_std


def param_shapes(K: int) -> dict:
    kh, kw = KERNEL
    c1, c2, c3 = CONV_FILTERS
    return {
        "conv1.w": (kh, kw, 1, c1), "conv1.b": (c1,),
        "conv2.w": (kh, kw, c1, c2), "conv2.b": (c2,),
        "conv3.w": (kh, kw, c2, c3), "conv3.b": (c3,),
        "dense1.w": (K * 2 * c3, HIDDEN), "dense1.b": (HIDDEN,),
        "out.w": (HIDDEN, K), "out.b": (K,),
    }


def init_model(K: int, rng: np.random.Generator, dropout_rate: float = 0.25) -> CnnModel:
    """Glorot-uniform weights, zero biases."""
    params = {}
    for name, shape in param_shapes(K).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
            continue
        if len(shape) == 4:
            fan_in = shape[0] * shape[1] * shape[2]
            fan_out = shape[0] * shape[1] * shape[3]
        else:
            fan_in, fan_out = shape
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform(-lim, lim, size=shape)
    return CnnModel(params, K, dropout_rate=dropout_rate)


def _pads(k: int) -> tuple[int, int]:
    # even kernels put the extra row/column at the bottom/right
    total = k - 1
    return total // 2, total - total // 2


def conv2d_same(x, w, b) -> np.ndarray:
    """Cross-correlation with zero 'same' padding, stride 1."""
    x = np.asarray(x, float)
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"expected (N,H,W,C) input and (kh,kw,C,F) filters, got {x.shape}, {w.shape}")
    N, H, W, C = x.shape
    kh, kw, cw, F = w.shape
    if cw != C or np.shape(b) != (F,):
        raise ShapeError(f"filters {w.shape} / biases {np.shape(b)} do not match {C} input channels")
    (t, bo), (le, ri) = _pads(kh), _pads(kw)
    xp = np.pad(x, ((0, 0), (t, bo), (le, ri), (0, 0)))
    out = np.broadcast_to(b, (N, H, W, F)).copy()
    for i in range(kh):
        for j in range(kw):
            out += xp[:, i:i + H, j:j + W, :] @ w[i, j]
    return out[0] if squeeze else out


def conv2d_same_backward(x, w, dout):
    """Gradients (dx, dw, db) of ``conv2d_same`` given upstream ``dout``."""
    N, H, W, C = x.shape
    kh, kw, _, F = w.shape
    (t, bo), (le, ri) = _pads(kh), _pads(kw)
    xp = np.pad(x, ((0, 0), (t, bo), (le, ri), (0, 0)))
    dxp = np.zeros_like(xp)
    dw = np.empty_like(w)
    for i in range(kh):
        for j in range(kw):
            window = xp[:, i:i + H, j:j + W, :]
            dw[i, j] = np.tensordot(window, dout, axes=([0, 1, 2], [0, 1, 2]))
            dxp[:, i:i + H, j:j + W, :] += dout @ w[i, j].T
    return dxp[:, t:t + H, le:le + W, :], dw, dout.sum(axis=(0, 1, 2))


def relu(x):
    return np.maximum(x, 0.0)


def mae_loss(pred, target) -> float:
    pred, target = np.asarray(pred, float), np.asarray(target, float)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    return float(np.mean(np.abs(pred - target)))


def mae_grad(pred, target) -> np.ndarray:
    """Subgradient of the batch-mean MAE; sign(0) = 0."""
    pred, target = np.asarray(pred, float), np.asarray(target, float)
    return np.sign(pred - target) / pred.size


def forward(model: CnnModel, x, train: bool = False, rng: np.random.Generator | None = None,
            return_cache: bool = False):
    """Map standardised ``(N, K, 2)`` features to ``(N, K)`` outputs.

    Dropout (inverted scaling) runs only when ``train`` is true, so
    inference is deterministic.
    """
    x = np.asarray(x, float)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.shape[1:] != (model.trained_K, 2):
        raise ShapeError(f"model expects (K={model.trained_K}, 2) inputs, got {x.shape[1:]}")
    p = model.params
    a0 = x[..., None]
    z1 = conv2d_same(a0, p["conv1.w"], p["conv1.b"])
    a1 = relu(z1)
    z2 = conv2d_same(a1, p["conv2.w"], p["conv2.b"])
    a2 = relu(z2)
    z3 = conv2d_same(a2, p["conv3.w"], p["conv3.b"])
    a3 = relu(z3)
    flat = a3.reshape(len(x), -1)
    z4 = flat @ p["dense1.w"] + p["dense1.b"]
    a4 = relu(z4)
    mask = None
    if train and model.dropout_rate > 0:
        if rng is None:
            raise ValueError("train mode needs an rng for dropout")
        keep = 1.0 - model.dropout_rate
        mask = (rng.random(a4.shape) < keep) / keep
        a4 = a4 * mask
    out = a4 @ p["out.w"] + p["out.b"]
    if single:
        out = out[0]
    if return_cache:
        cache = dict(a0=a0, z1=z1, a1=a1, z2=z2, a2=a2, z3=z3, a3=a3, flat=flat, z4=z4, a4=a4, mask=mask)
        return out, cache
    return out


def backward(model: CnnModel, cache: dict, dout) -> dict:
    """Reverse-mode gradients for every parameter given dLoss/dOutput ``(N, K)``."""
    p = model.params
    dout = np.atleast_2d(dout)
    g = {}
    g["out.w"] = cache["a4"].T @ dout
    g["out.b"] = dout.sum(axis=0)
    da4 = dout @ p["out.w"].T
    if cache["mask"] is not None:
        da4 = da4 * cache["mask"]
    dz4 = da4 * (cache["z4"] > 0)
    g["dense1.w"] = cache["flat"].T @ dz4
    g["dense1.b"] = dz4.sum(axis=0)
    da3 = (dz4 @ p["dense1.w"].T).reshape(cache["a3"].shape)
    dz3 = da3 * (cache["z3"] > 0)
    da2, g["conv3.w"], g["conv3.b"] = conv2d_same_backward(cache["a2"], p["conv3.w"], dz3)
    dz2 = da2 * (cache["z2"] > 0)
    da1, g["conv2.w"], g["conv2.b"] = conv2d_same_backward(cache["a1"], p["conv2.w"], dz2)
    dz1 = da1 * (cache["z1"] > 0)
    _, g["conv1.w"], g["conv1.b"] = conv2d_same_backward(cache["a0"], p["conv1.w"], dz1)
    return g


def loss_and_grads(model: CnnModel, x, target, rng=None, train: bool = True):
    pred, cache = forward(model, x, train=train, rng=rng, return_cache=True)
    target = np.asarray(target, float).reshape(pred.shape)
    return mae_loss(pred, target), backward(model, cache, mae_grad(pred, target).reshape(-1, model.trained_K))


@dataclass
class AdamState:
    m: dict
    v: dict

    @classmethod
    def zeros_like(cls, params: dict) -> "AdamState":
        return cls({k: np.zeros_like(v) for k, v in params.items()},
                   {k: np.zeros_like(v) for k, v in params.items()})


def decayed_lr(lr: float, step_index: int, decay: float = 0.96, decay_steps: int = 10) -> float:
    return lr * decay ** (step_index // decay_steps)


def adam_step(params: dict, grads: dict, state: AdamState, step_index: int, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              decay: float = 0.96, decay_steps: int = 10) -> tuple[dict, AdamState]:
    """One bias-corrected ADAM update; ``step_index`` counts from 0."""
    t = step_index + 1
    rate = decayed_lr(lr, step_index, decay, decay_steps)
    new_params, m, v = {}, {}, {}
    for k, w in params.items():
        g = grads[k]
        m[k] = beta1 * state.m[k] + (1 - beta1) * g
        v[k] = beta2 * state.v[k] + (1 - beta2) * g * g
        m_hat = m[k] / (1 - beta1**t)
        v_hat = v[k] / (1 - beta2**t)
        new_params[k] = w - rate * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v)
