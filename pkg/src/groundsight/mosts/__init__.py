"""Numeric kernels and a toy forward pass for one-shot texture segmentation."""

from .kernels import (
    BatchNorm,
    ChannelAttention,
    ConvSpec,
    GroupBranch,
    bilinear_upsample,
    channel_attention,
    conv_forward,
    cosine_similarity_map,
    global_avg_pool,
    local_grouping,
    similarity_mask,
)
from .loss import ComboLossParams, combo_loss
from .model import ToyMosts, ToyMostsConfig, init_weights, mosts_forward, weight_shapes
from .weights import load_weights, save_weights

__all__ = [
    "BatchNorm",
    "ChannelAttention",
    "ComboLossParams",
    "ConvSpec",
    "GroupBranch",
    "ToyMosts",
    "ToyMostsConfig",
    "bilinear_upsample",
    "channel_attention",
    "combo_loss",
    "conv_forward",
    "cosine_similarity_map",
    "global_avg_pool",
    "init_weights",
    "load_weights",
    "local_grouping",
    "mosts_forward",
    "save_weights",
    "similarity_mask",
    "weight_shapes",
]
