"""Minimal differentiable-network engine for the IQ-offset regressors."""

from .layers import Conv2DSpec, DenseSpec, FlattenSpec, MaxPoolSpec, LINEAR, RELU
from .model import (DEFAULT_LAYERS, DEFAULT_SEI_LAYERS, NetworkConfig,
                    NetworkModel, backward, forward, frames_to_tensor,
                    init_model, model_digest, mse_loss, predict, rmsprop_step)
from .training import (DEFAULT_SEARCH_SPACE, TrainConfig, TrainResult,
                       random_search, train)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Conv2DSpec", "DenseSpec", "FlattenSpec", "MaxPoolSpec", "LINEAR", "RELU",
    "DEFAULT_LAYERS", "DEFAULT_SEI_LAYERS", "NetworkConfig", "NetworkModel",
    "backward", "forward", "frames_to_tensor", "init_model", "model_digest",
    "mse_loss", "predict", "rmsprop_step", "DEFAULT_SEARCH_SPACE",
    "TrainConfig", "TrainResult", "random_search", "train",
    "load_checkpoint", "save_checkpoint",
]
