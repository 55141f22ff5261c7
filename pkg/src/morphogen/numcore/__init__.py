"""Minimal float64 tensor core: tape-based reverse-mode AD, cells, optimizers."""

from .cells import GRUParams, LSTMParams, bilinear_attention, gru_step, lstm_step
from .init import derive_rng, glorot
from .ops import (
    add,
    affine,
    concat,
    dropout,
    embedding,
    log_softmax,
    matmul,
    mul,
    multi_hot_embedding,
    reshape,
    scale,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    stack,
    sub,
    take,
    tanh,
    total,
)
from .optim import adadelta_step, clip_and_step_sgd, clip_grad_norm, global_norm, zero_grads
from .serialize import dumps_params, load_params, loads_params, save_params
from .tensor import Parameter, Tape, Tensor, backward

__all__ = [
    "GRUParams", "LSTMParams", "Parameter", "Tape", "Tensor",
    "adadelta_step", "add", "affine", "backward", "bilinear_attention", "clip_and_step_sgd",
    "clip_grad_norm", "concat", "derive_rng", "dropout", "dumps_params", "embedding",
    "glorot", "global_norm", "gru_step", "load_params", "loads_params", "log_softmax",
    "lstm_step", "matmul", "mul", "multi_hot_embedding", "reshape", "save_params", "scale", "sigmoid",
    "softmax", "softmax_cross_entropy", "stack", "sub", "take", "tanh", "total", "zero_grads",
]
