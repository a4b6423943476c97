"""Network configuration, parameter state, and the forward/backward passes.

The engine supports exactly the layer set needed for the IQ-offset
regressors: Conv2D, MaxPool, Flatten, Dense with ReLU or linear activation,
mean-squared-error loss, and an RMSProp update.  Weights and activations are
float32 by default; reductions accumulate in float64.  A float64 mode exists
for gradient verification.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from .layers import (Conv2DSpec, DenseSpec, FlattenSpec, LINEAR, MaxPoolSpec,
                     layer_from_dict)
from ..utils import derive_seed

# Fig. 3-style default: two conv layers feeding four dense layers with a
# linear scalar head.  Layer sizes are config-overridable; the desk-scale
# training configs in configs/ use lighter settings.
DEFAULT_LAYERS = (
    Conv2DSpec(filters=64, kernel=(1, 8)),
    Conv2DSpec(filters=16, kernel=(2, 4)),
    FlattenSpec(),
    DenseSpec(256),
    DenseSpec(128),
    DenseSpec(64),
    DenseSpec(1, activation=LINEAR),
)

# Variant used by the emitter-identification stage: one size-2 max-pool
# between the convolutional and dense layers.
DEFAULT_SEI_LAYERS = (
    Conv2DSpec(filters=64, kernel=(1, 8)),
    Conv2DSpec(filters=16, kernel=(2, 4)),
    MaxPoolSpec(pool=(1, 2)),
    FlattenSpec(),
    DenseSpec(256),
    DenseSpec(128),
    DenseSpec(64),
    DenseSpec(1, activation=LINEAR),
)


@dataclass(frozen=True)
class NetworkConfig:
    """Ordered layer list over a (2, frame_len, 1) input."""

    input_shape: tuple[int, int, int]
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "input_shape",
                           tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.input_shape) != 3:
            raise ConfigurationError(
                f"input_shape must be rank 3, got {self.input_shape}")
        if not self.layers:
            raise ConfigurationError("network needs at least one layer")
        self.shape_chain()         # raises if consecutive shapes do not chain
        last = self.layers[-1]
        if not (isinstance(last, DenseSpec) and last.units == 1
                and last.activation == LINEAR):
            raise ConfigurationError(
                "final layer must be Dense(1) with linear activation")

    def shape_chain(self):
        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(layer.out_shape(shapes[-1]))
        return shapes

    def to_dict(self):
        return {"input_shape": list(self.input_shape),
                "layers": [_layer_to_dict(l) for l in self.layers]}

    @classmethod
    def from_dict(cls, d):
        return cls(input_shape=tuple(d["input_shape"]),
                   layers=tuple(layer_from_dict(ld) for ld in d["layers"]))

    @classmethod
    def default(cls, frame_len: int, sei_variant: bool = False):
        layers = DEFAULT_SEI_LAYERS if sei_variant else DEFAULT_LAYERS
        return cls(input_shape=(2, frame_len, 1), layers=layers)


def _layer_to_dict(layer):
    d = {"kind": layer.kind}
    for key in ("filters", "kernel", "stride", "activation", "pool", "units"):
        if hasattr(layer, key):
            value = getattr(layer, key)
            d[key] = list(value) if isinstance(value, tuple) else value
    return d


@dataclass
class NetworkModel:
    """Layer parameters plus RMSProp state and training metadata."""

    config: NetworkConfig
    params: list            # per layer: dict of arrays ("w", "b") or {}
    opt_state: list         # per layer: dict of squared-gradient averages
    meta: dict = field(default_factory=dict)
    dtype: np.dtype = np.dtype(np.float32)

    @property
    def frame_len(self) -> int:
        return self.config.input_shape[1]

    def parameter_count(self) -> int:
        return sum(int(a.size) for p in self.params for a in p.values())


def init_model(config: NetworkConfig, seed: int = 0,
               dtype=np.float32) -> NetworkModel:
    """He/Glorot-uniform weights, zero biases, zeroed optimizer state."""
    dtype = np.dtype(dtype)
    shapes = config.shape_chain()
    params, opt_state = [], []
    for k, layer in enumerate(config.layers):
        rng = np.random.default_rng(derive_seed(seed, k))
        p = layer.init_params(shapes[k], rng, dtype)
        params.append(p)
        opt_state.append({key: np.zeros_like(arr) for key, arr in p.items()})
    return NetworkModel(config=config, params=params, opt_state=opt_state,
                        meta={"init_seed": seed}, dtype=dtype)


def forward(model: NetworkModel, batch: np.ndarray,
            want_caches: bool = False):
    """Run the network; returns per-frame predictions of shape (B,).

    With ``want_caches`` the per-layer caches needed by :func:`backward`
    are returned as well.
    """
    batch = np.asarray(batch)
    if batch.ndim != 4 or batch.shape[1:] != model.config.input_shape:
        raise ConfigurationError(
            f"batch shape {batch.shape} does not match input "
            f"(B, {', '.join(map(str, model.config.input_shape))})")
    x = batch.astype(model.dtype, copy=False)
    caches = []
    for layer, p in zip(model.config.layers, model.params):
        x, cache = layer.forward(x, p, want_caches)
        caches.append(cache)
    preds = x[:, 0]
    if want_caches:
        return preds, caches
    return preds


def mse_loss(preds: np.ndarray, targets: np.ndarray) -> float:
    """Mean over the batch of squared error, accumulated in float64."""
    d = preds.astype(np.float64) - np.asarray(targets, dtype=np.float64)
    return float(np.mean(d * d))


def backward(model: NetworkModel, caches, preds: np.ndarray,
             targets: np.ndarray):
    """Gradient of the MSE loss w.r.t. every parameter.

    ``caches`` must come from a ``forward(..., want_caches=True)`` call on
    the same batch.  Returns a per-layer list of gradient dicts mirroring
    ``model.params``.
    """
    n = preds.shape[0]
    dloss = (2.0 / n) * (preds.astype(np.float64)
                         - np.asarray(targets, dtype=np.float64))
    dy = dloss.astype(model.dtype)[:, None]
    grads = [None] * len(model.params)
    for k in range(len(model.params) - 1, -1, -1):
        layer = model.config.layers[k]
        dy, g = layer.backward(dy, caches[k], model.params[k], need_dx=k > 0)
        grads[k] = g
    return grads


def rmsprop_step(model: NetworkModel, grads, lr: float, decay: float = 0.9,
                 epsilon: float = 1e-8) -> NetworkModel:
    """In-place RMSProp update; returns the model for chaining.

    s <- decay * s + (1 - decay) * g^2
    w <- w - lr * g / (sqrt(s) + epsilon)
    """
    for p, s, g in zip(model.params, model.opt_state, grads):
        for key in p:
            gk = g[key]
            sk = s[key]
            sk *= decay
            sk += (1.0 - decay) * gk * gk
            p[key] -= lr * gk / (np.sqrt(sk) + epsilon)
    return model


def frames_to_tensor(frames: np.ndarray, dtype=np.float32) -> np.ndarray:
    """Complex frames (n, L) -> network input (n, 2, L, 1): row 0 = I, row 1 = Q."""
    frames = np.asarray(frames)
    out = np.empty((frames.shape[0], 2, frames.shape[1], 1), dtype=dtype)
    out[:, 0, :, 0] = frames.real
    out[:, 1, :, 0] = frames.imag
    return out


def predict(model: NetworkModel, frames: np.ndarray,
            batch_size: int = 512) -> np.ndarray:
    """Estimates for complex frames (n, L); batched forward, float64 output."""
    n = frames.shape[0]
    out = np.empty(n, dtype=np.float64)
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        out[lo:hi] = forward(model, frames_to_tensor(frames[lo:hi], model.dtype))
    return out


def model_digest(model: NetworkModel) -> str:
    """Stable hex digest over the config and all parameter bytes."""
    h = hashlib.sha256()
    h.update(json.dumps(model.config.to_dict(), sort_keys=True).encode())
    for p in model.params:
        for key in sorted(p):
            h.update(key.encode())
            h.update(np.ascontiguousarray(p[key]).tobytes())
    return h.hexdigest()
