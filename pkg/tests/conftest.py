"""Shared test oracles.

The finite-difference gradient oracle and the quadruple-loop convolution
reference live here so both the unit tests and the acceptance suite check
the engine against the same independent implementations.
"""

import os
import sys

import numpy as np
import pytest

from rfsei.network import forward, backward, mse_loss
from rfsei.network.layers import Conv2DSpec, DenseSpec, MaxPoolSpec, RELU
from rfsei.network.model import init_model


def conv2d_reference(x, w, b, stride):
    """Direct quadruple-loop valid convolution; the independent oracle."""
    bsz, h, w_in, c = x.shape
    kh, kw, _, f = w.shape
    sh, sw = stride
    oh = (h - kh) // sh + 1
    ow = (w_in - kw) // sw + 1
    out = np.zeros((bsz, oh, ow, f), dtype=np.float64)
    for n in range(bsz):
        for oi in range(oh):
            for oj in range(ow):
                for ff in range(f):
                    acc = 0.0
                    for i in range(kh):
                        for j in range(kw):
                            for cc in range(c):
                                acc += (x[n, oi * sh + i, oj * sw + j, cc]
                                        * w[i, j, cc, ff])
                    out[n, oi, oj, ff] = acc + b[ff]
    return out


def _activation_signature(model, x):
    """ReLU masks and pool routing choices along the forward pass.

    A finite-difference stencil is only a valid derivative estimate when the
    network is differentiable across it; a signature change between the two
    stencil endpoints flags a crossed ReLU kink or max switch.
    """
    sig = []
    cur = np.asarray(x, dtype=model.dtype)
    for layer, p in zip(model.config.layers, model.params):
        out, _ = layer.forward(cur, p, False)
        if getattr(layer, "activation", None) == RELU:
            sig.append(np.signbit(out) | (out == 0))
        if isinstance(layer, MaxPoolSpec):
            first_hit = np.full(out.shape, -1, dtype=np.int64)
            for t, (_i, _j, view) in enumerate(layer._taps(cur)):
                hit = (view == out) & (first_hit < 0)
                first_hit[hit] = t
            sig.append(first_hit)
        cur = out
    return sig


def _same_signature(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def finite_difference_check(config, seed, batch=3, eps=1e-3):
    """Compare backprop gradients with central finite differences.

    Runs the model in float64.  Coordinates whose stencil crosses a point of
    non-differentiability (ReLU kink or max-pool switch) are excluded, since
    the difference quotient does not estimate the gradient there; the
    fraction of such coordinates is returned for sanity checking.

    Returns (max_relative_error, n_checked, n_skipped).
    """
    model = init_model(config, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 99)
    x = rng.normal(size=(batch,) + config.input_shape)
    y = rng.normal(size=batch)
    preds, caches = forward(model, x, want_caches=True)
    grads = backward(model, caches, preds, y)
    base_sig = _activation_signature(model, x)

    worst, checked, skipped = 0.0, 0, 0
    for k, p in enumerate(model.params):
        for key, arr in p.items():
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                ix = it.multi_index
                old = arr[ix]
                arr[ix] = old + eps
                loss_hi = mse_loss(forward(model, x), y)
                sig_hi = _activation_signature(model, x)
                arr[ix] = old - eps
                loss_lo = mse_loss(forward(model, x), y)
                sig_lo = _activation_signature(model, x)
                arr[ix] = old
                if not (_same_signature(base_sig, sig_hi)
                        and _same_signature(base_sig, sig_lo)):
                    skipped += 1
                    continue
                g_fd = (loss_hi - loss_lo) / (2.0 * eps)
                g_bp = grads[k][key][ix]
                rel = abs(g_bp - g_fd) / max(abs(g_bp), abs(g_fd), 1e-6)
                worst = max(worst, rel)
                checked += 1
    return worst, checked, skipped


GRADCHECK_CONFIGS = {
    "conv2d": (Conv2DSpec(filters=3, kernel=(1, 4)),
               Conv2DSpec(filters=2, kernel=(2, 3), stride=(1, 2)),
               "flatten", DenseSpec(1, activation="linear")),
    "maxpool": (Conv2DSpec(filters=3, kernel=(1, 3), activation="linear"),
                MaxPoolSpec(pool=(2, 2)), "flatten",
                DenseSpec(1, activation="linear")),
    "dense": ("flatten", DenseSpec(8), DenseSpec(4),
              DenseSpec(1, activation="linear")),
    "full": (Conv2DSpec(filters=3, kernel=(1, 4)),
             Conv2DSpec(filters=2, kernel=(2, 3)),
             MaxPoolSpec(pool=(1, 2)), "flatten", DenseSpec(5),
             DenseSpec(1, activation="linear")),
}


def gradcheck_config(name, width=12):
    from rfsei.network.layers import FlattenSpec
    from rfsei.network.model import NetworkConfig

    layers = tuple(FlattenSpec() if l == "flatten" else l
                   for l in GRADCHECK_CONFIGS[name])
    return NetworkConfig(input_shape=(2, width, 1), layers=layers)


def pass_line(criterion: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] {criterion}{suffix}")
    assert ok, f"{criterion}{suffix}"


def nightly_enabled() -> bool:
    return os.environ.get("RFSEI_NIGHTLY", "") not in ("", "0")


requires_nightly = pytest.mark.skipif(
    not nightly_enabled(),
    reason="nightly trend suite disabled (set RFSEI_NIGHTLY=1)")
