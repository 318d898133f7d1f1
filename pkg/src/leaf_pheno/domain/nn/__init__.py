"""Dense-tensor network engine: layer kernels, losses, backprop, Adam, training."""
from .layers import LayerSpec
from .losses import WeightVector, bce, focal_loss, weighted_mse
from .model import (ModelParams, Network, activation_bytes, backward, count_params, dense_spec,
                    forward, grower_spec, init_params, tracer_spec)
from .optim import AdamConfig, AdamState, adam_step
from .train import TrainConfig, TrainResult, train_model
