"""Minimal numpy network stack with analytic gradients."""
from .architectures import discriminator, paired_generator, shared_param_keys, unpaired_generator
from .layers import LAYER_KINDS, LayerSpec, avgpool_global, batchnorm, conv2d, dropout, leaky_relu, linear
from .network import ModelParams, NetworkSpec, backward, forward, init_params
from .optim import AdamState, HoldDecaySchedule, StaircaseSchedule, adam_step, lr_schedule
from .serialize import ModelFormatError, dumps_model, load_model, loads_model, save_model

__all__ = [
    "LAYER_KINDS", "AdamState", "HoldDecaySchedule", "LayerSpec", "ModelFormatError", "ModelParams",
    "NetworkSpec", "StaircaseSchedule", "adam_step", "avgpool_global", "backward", "batchnorm", "conv2d",
    "discriminator", "dropout", "dumps_model", "forward", "init_params", "leaky_relu", "linear",
    "load_model", "loads_model", "lr_schedule", "paired_generator", "save_model", "shared_param_keys",
    "unpaired_generator",
]
