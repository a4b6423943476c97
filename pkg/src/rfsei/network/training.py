"""Mini-batch RMSProp training loop and the parameter random-search driver."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, asdict, replace

import numpy as np

from ..errors import ConfigurationError, TrainingDivergedError
from ..utils import derive_seed
from .layers import Conv2DSpec, DenseSpec, FlattenSpec, LINEAR, MaxPoolSpec
from .model import (NetworkConfig, NetworkModel, backward, forward,
                    frames_to_tensor, init_model, mse_loss, predict,
                    rmsprop_step)


@dataclass(frozen=True)
class TrainConfig:
    """RMSProp hyperparameters and loop control.

    Defaults are conventional RMSProp settings; every field is overridable
    from the CLI config file.
    """

    learning_rate: float = 1e-3
    decay: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 30
    patience: int = 5
    seed: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class TrainResult:
    model: NetworkModel
    history: dict               # {"epoch": [...], "train_loss": [...], "val_loss": [...]}
    best_epoch: int
    best_val_loss: float


def _dataset_digest(spec) -> str:
    return hashlib.sha256(
        json.dumps(spec.to_dict(), sort_keys=True).encode()).hexdigest()


def _snapshot(model: NetworkModel):
    return ([{k: v.copy() for k, v in p.items()} for p in model.params],
            [{k: v.copy() for k, v in s.items()} for s in model.opt_state])


def train(model: NetworkModel, dataset, hyper: TrainConfig = TrainConfig(),
          on_epoch=None) -> TrainResult:
    """Train ``model`` on the dataset's train split.

    Shuffles per epoch with a seeded generator, records train and validation
    loss per epoch, and restores the weights of the best validation epoch on
    return.  A non-finite loss aborts with :class:`TrainingDivergedError`.
    Fully deterministic for fixed seeds.
    """
    frames, labels = dataset.train
    val_frames, val_labels = dataset.val
    n = frames.shape[0]
    if n == 0:
        raise ConfigurationError("dataset has an empty training split")
    if frames.shape[1] != model.frame_len:
        raise ConfigurationError(
            f"dataset frame_len {frames.shape[1]} != model input "
            f"{model.frame_len}")

    history = {"epoch": [], "train_loss": [], "val_loss": []}
    best_val = np.inf
    best_epoch = -1
    best_state = _snapshot(model)
    stale = 0
    start_epoch = int(model.meta.get("epochs_trained", 0))

    for epoch in range(hyper.max_epochs):
        rng = np.random.default_rng(
            derive_seed(hyper.seed, start_epoch + epoch))
        perm = rng.permutation(n)
        loss_sum = 0.0
        t0 = time.monotonic()
        for lo in range(0, n, hyper.batch_size):
            idx = perm[lo:lo + hyper.batch_size]
            x = frames_to_tensor(frames[idx], model.dtype)
            preds, caches = forward(model, x, want_caches=True)
            loss = mse_loss(preds, labels[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {lo}")
            grads = backward(model, caches, preds, labels[idx])
            rmsprop_step(model, grads, hyper.learning_rate, hyper.decay,
                         hyper.epsilon)
            loss_sum += loss * idx.size
        train_loss = loss_sum / n

        if val_frames.shape[0] > 0:
            val_loss = mse_loss(predict(model, val_frames), val_labels)
        else:
            val_loss = train_loss
        history["epoch"].append(start_epoch + epoch)
        history["train_loss"].append(train_loss)
        history["val_loss"].append(val_loss)
        if on_epoch is not None:
            on_epoch(start_epoch + epoch, train_loss, val_loss,
                     time.monotonic() - t0)

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = start_epoch + epoch
            best_state = _snapshot(model)
            stale = 0
        else:
            stale += 1
            if stale > hyper.patience:
                break

    model.params, model.opt_state = best_state
    model.meta["epochs_trained"] = start_epoch + len(history["epoch"])
    model.meta.setdefault("loss_history", {"epoch": [], "train_loss": [],
                                           "val_loss": []})
    for key in history:
        model.meta["loss_history"][key].extend(history[key])
    model.meta["dataset_spec_sha256"] = _dataset_digest(dataset.spec)
    model.meta["train_config"] = hyper.to_dict()
    return TrainResult(model=model, history=history, best_epoch=best_epoch,
                       best_val_loss=float(best_val))


# Search space mirrors the iterative parameter-selection procedure: sample a
# layer sizing, train briefly, keep the best validation loss.
DEFAULT_SEARCH_SPACE = {
    "conv1_filters": (16, 32, 64),
    "conv1_width": (4, 8, 16),
    "conv2_filters": (8, 16, 32),
    "conv2_width": (2, 4, 8),
    "dense": ((64, 32), (128, 64), (256, 128, 64)),
}


def random_search(dataset, n_trials: int = 8, search_space=None,
                  epochs: int = 3, seed: int = 0, sei_variant: bool = False,
                  hyper: TrainConfig | None = None):
    """Sample layer sizings, train each candidate briefly, rank by val loss.

    Returns (best_config, trials) where ``trials`` is a list of
    (config, val_loss) sorted best-first.
    """
    space = dict(DEFAULT_SEARCH_SPACE, **(search_space or {}))
    frame_len = dataset.frames.shape[1]
    base_hyper = hyper or TrainConfig()
    rng = np.random.default_rng(seed)
    trials = []
    for t in range(n_trials):
        pick = {k: v[rng.integers(0, len(v))] for k, v in space.items()}
        layers = [Conv2DSpec(filters=int(pick["conv1_filters"]),
                             kernel=(1, int(pick["conv1_width"]))),
                  Conv2DSpec(filters=int(pick["conv2_filters"]),
                             kernel=(2, int(pick["conv2_width"])))]
        if sei_variant:
            layers.append(MaxPoolSpec(pool=(1, 2)))
        layers.append(FlattenSpec())
        layers.extend(DenseSpec(int(u)) for u in pick["dense"])
        layers.append(DenseSpec(1, activation=LINEAR))
        config = NetworkConfig(input_shape=(2, frame_len, 1),
                               layers=tuple(layers))
        model = init_model(config, seed=derive_seed(seed, t))
        result = train(model, dataset,
                       replace(base_hyper, max_epochs=epochs,
                               seed=derive_seed(seed, t, 1)))
        trials.append((config, result.best_val_loss))
    trials.sort(key=lambda cv: cv[1])
    return trials[0][0], trials
