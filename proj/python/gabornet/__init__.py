"""Learnable Gabor first-layer convolutional networks (C++ core, numpy interface)."""

from ._gabornet import (
    Network,
    adam_step,
    build_filter_bank,
    conv2d_forward,
    conv2d_naive,
    default_gcnn_layers,
    eval_gabor,
    gen_texture_dataset,
    gradcheck,
    init_param_set,
    kernel_param_grads,
    make_kernel,
    maxpool2d,
)

__all__ = [
    "Network",
    "adam_step",
    "build_filter_bank",
    "conv2d_forward",
    "conv2d_naive",
    "default_gcnn_layers",
    "eval_gabor",
    "gen_texture_dataset",
    "gradcheck",
    "init_param_set",
    "kernel_param_grads",
    "make_kernel",
    "maxpool2d",
]
