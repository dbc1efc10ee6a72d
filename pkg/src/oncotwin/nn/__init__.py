"""Dense-tensor autodiff engine, layers, and optimizer."""

from .autodiff import (
    ConfigError,
    GradientError,
    ShapeError,
    Tensor,
    UsageError,
    clip_min,
    concat,
    constant,
    dropout,
    erf,
    exp,
    log,
    log_softmax,
    logsumexp,
    matmul,
    mean,
    narrow,
    no_grad,
    relu,
    reshape,
    scaled_dot_attention,
    sigmoid,
    softmax,
    softplus,
    sqrt,
    sum_,
    tanh,
    transpose,
)
from .layers import (
    BatchNorm1d,
    DropoutSpec,
    EncoderBlock,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
)
from .optim import Adam

__all__ = [
    "Adam",
    "BatchNorm1d",
    "ConfigError",
    "DropoutSpec",
    "EncoderBlock",
    "FeedForward",
    "GradientError",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadAttention",
    "ShapeError",
    "Tensor",
    "UsageError",
    "clip_min",
    "concat",
    "constant",
    "dropout",
    "erf",
    "exp",
    "log",
    "log_softmax",
    "logsumexp",
    "matmul",
    "mean",
    "narrow",
    "no_grad",
    "relu",
    "reshape",
    "scaled_dot_attention",
    "sigmoid",
    "softmax",
    "softplus",
    "sqrt",
    "sum_",
    "tanh",
    "transpose",
]
