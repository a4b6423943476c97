"""Layer forward/backward kernels for the minimal network engine.

Array layout is NHWC: a batch of frames is (B, 2, N, 1) with row 0 holding I
and row 1 holding Q.  Convolutions are valid-padding with configurable
stride, lowered to GEMM via an explicit im2col buffer.  Max pooling is
non-overlapping; remainder rows/columns that do not fill a window are
dropped and receive zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError

RELU = "relu"
LINEAR = "linear"
_ACTIVATIONS = (RELU, LINEAR)


def _check_activation(activation: str) -> None:
    if activation not in _ACTIVATIONS:
        raise ConfigurationError(f"unknown activation {activation!r}")


@dataclass(frozen=True)
class Conv2DSpec:
    filters: int
    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    activation: str = RELU
    kind: str = "conv2d"

    def __post_init__(self):
        _check_activation(self.activation)
        object.__setattr__(self, "kernel", tuple(int(k) for k in self.kernel))
        object.__setattr__(self, "stride", tuple(int(s) for s in self.stride))
        if self.filters <= 0 or min(self.kernel) <= 0 or min(self.stride) <= 0:
            raise ConfigurationError(f"invalid conv2d spec {self}")

    def out_shape(self, in_shape):
        h, w, c = in_shape
        kh, kw = self.kernel
        sh, sw = self.stride
        if kh > h or kw > w:
            raise ConfigurationError(
                f"conv kernel {self.kernel} larger than input {in_shape}")
        return ((h - kh) // sh + 1, (w - kw) // sw + 1, self.filters)

    def init_params(self, in_shape, rng, dtype):
        kh, kw = self.kernel
        c = in_shape[2]
        fan_in = kh * kw * c
        if self.activation == RELU:
            limit = np.sqrt(6.0 / fan_in)                      # He uniform
        else:
            limit = np.sqrt(6.0 / (fan_in + kh * kw * self.filters))
        w = rng.uniform(-limit, limit, size=(kh, kw, c, self.filters))
        return {"w": w.astype(dtype), "b": np.zeros(self.filters, dtype=dtype)}

    def _w2d(self, params):
        # GEMM weight layout: K axis ordered (C, kh, kw) to match the im2col
        # column order produced by sliding_window_view
        kh, kw = self.kernel
        c, f = params["w"].shape[2], params["w"].shape[3]
        return np.ascontiguousarray(params["w"].transpose(2, 0, 1, 3)) \
            .reshape(kh * kw * c, f)

    def forward(self, x, params, want_cache):
        kh, kw = self.kernel
        sh, sw = self.stride
        b_sz, h, w_in, c = x.shape
        oh, ow, f = self.out_shape((h, w_in, c))
        view = np.lib.stride_tricks.sliding_window_view(
            x, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
        cols2d = view.reshape(b_sz * oh * ow, c * kh * kw)
        y = cols2d @ self._w2d(params)
        y += params["b"]
        y = y.reshape(b_sz, oh, ow, f)
        mask = None
        if self.activation == RELU:
            mask = y > 0
            y *= mask
        cache = (x.shape, cols2d, mask) if want_cache else None
        return y, cache

    def backward(self, dy, cache, params, need_dx=True):
        x_shape, cols2d, mask = cache
        kh, kw = self.kernel
        sh, sw = self.stride
        b_sz, h, w_in, c = x_shape
        oh, ow, f = dy.shape[1:]
        if mask is not None:
            dy = dy * mask
        dy2d = dy.reshape(b_sz * oh * ow, f)
        dw = (cols2d.T @ dy2d).reshape(c, kh, kw, f).transpose(1, 2, 0, 3)
        dw = np.ascontiguousarray(dw)
        db = dy2d.sum(axis=0, dtype=np.float64).astype(dy.dtype)
        if not need_dx:
            return None, {"w": dw, "b": db}
        dcols = (dy2d @ self._w2d(params).T) \
            .reshape(b_sz, oh, ow, c, kh, kw)
        dx = np.zeros(x_shape, dtype=dy.dtype)
        for i in range(kh):
            for j in range(kw):
                dx[:, i:i + sh * oh:sh, j:j + sw * ow:sw, :] += \
                    dcols[:, :, :, :, i, j]
        return dx, {"w": dw, "b": db}


@dataclass(frozen=True)
class MaxPoolSpec:
    pool: tuple[int, int]
    kind: str = "maxpool"

    def __post_init__(self):
        object.__setattr__(self, "pool", tuple(int(p) for p in self.pool))
        if min(self.pool) <= 0:
            raise ConfigurationError(f"invalid pool size {self.pool}")

    def out_shape(self, in_shape):
        h, w, c = in_shape
        ph, pw = self.pool
        if h // ph == 0 or w // pw == 0:
            raise ConfigurationError(
                f"pool {self.pool} larger than input {in_shape}")
        return (h // ph, w // pw, c)

    def init_params(self, in_shape, rng, dtype):
        return {}

    def _taps(self, x):
        """Views of x at each in-window offset, all shaped like the output."""
        ph, pw = self.pool
        oh, ow = x.shape[1] // ph, x.shape[2] // pw
        return [(i, j, x[:, i:i + oh * ph:ph, j:j + ow * pw:pw, :])
                for i in range(ph) for j in range(pw)]

    def forward(self, x, params, want_cache):
        taps = self._taps(x)
        y = taps[0][2].copy()
        for _, _, view in taps[1:]:
            np.maximum(y, view, out=y)
        cache = (x, y) if want_cache else None
        return y, cache

    def backward(self, dy, cache, params, need_dx=True):
        # Route each window's gradient to its first maximum, scanning window
        # offsets in row-major order (matches flat-argmax tie-breaking).
        x, y = cache
        ph, pw = self.pool
        oh, ow = x.shape[1] // ph, x.shape[2] // pw
        dx = np.zeros(x.shape, dtype=dy.dtype)
        taken = np.zeros(y.shape, dtype=bool)
        for i in range(ph):
            for j in range(pw):
                view = x[:, i:i + oh * ph:ph, j:j + ow * pw:pw, :]
                hit = (view == y) & ~taken
                dx[:, i:i + oh * ph:ph, j:j + ow * pw:pw, :] = \
                    np.where(hit, dy, 0)
                taken |= hit
        return dx, {}


@dataclass(frozen=True)
class FlattenSpec:
    kind: str = "flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def init_params(self, in_shape, rng, dtype):
        return {}

    def forward(self, x, params, want_cache):
        cache = x.shape if want_cache else None
        return x.reshape(x.shape[0], -1), cache

    def backward(self, dy, cache, params, need_dx=True):
        return dy.reshape(cache), {}


@dataclass(frozen=True)
class DenseSpec:
    units: int
    activation: str = RELU
    kind: str = "dense"

    def __post_init__(self):
        _check_activation(self.activation)
        if self.units <= 0:
            raise ConfigurationError(f"invalid dense units {self.units}")

    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ConfigurationError(
                f"dense layer needs a flat input, got shape {in_shape}")
        return (self.units,)

    def init_params(self, in_shape, rng, dtype):
        fan_in = in_shape[0]
        if self.activation == RELU:
            limit = np.sqrt(6.0 / fan_in)                      # He uniform
        else:
            limit = np.sqrt(6.0 / (fan_in + self.units))       # Glorot uniform
        w = rng.uniform(-limit, limit, size=(fan_in, self.units))
        return {"w": w.astype(dtype), "b": np.zeros(self.units, dtype=dtype)}

    def forward(self, x, params, want_cache):
        y = x @ params["w"] + params["b"]
        mask = None
        if self.activation == RELU:
            mask = y > 0
            y *= mask
        cache = (x, mask) if want_cache else None
        return y, cache

    def backward(self, dy, cache, params, need_dx=True):
        x, mask = cache
        if mask is not None:
            dy = dy * mask
        dw = x.T @ dy
        db = dy.sum(axis=0, dtype=np.float64).astype(dy.dtype)
        dx = dy @ params["w"].T if need_dx else None
        return dx, {"w": dw, "b": db}


_SPEC_KINDS = {
    "conv2d": Conv2DSpec,
    "maxpool": MaxPoolSpec,
    "flatten": FlattenSpec,
    "dense": DenseSpec,
}


def layer_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    cls = _SPEC_KINDS.get(kind)
    if cls is None:
        raise ConfigurationError(f"unknown layer kind {kind!r}")
    for key in ("kernel", "stride", "pool"):
        if key in d:
            d[key] = tuple(d[key])
    return cls(**d)
