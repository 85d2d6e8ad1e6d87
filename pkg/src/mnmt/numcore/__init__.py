"""Minimal dense-tensor arithmetic with reverse-mode differentiation."""
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import AdaDeltaState, adadelta_step, clip_by_global_norm
from .tensor import (
    Tape,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    embedding,
    exp,
    getitem,
    log,
    log_softmax,
    matmul,
    maxout,
    mul,
    parameter,
    reshape,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    stack,
    sub,
    sum_,
    tanh,
)


def uniform_init(rng, shape, scale=0.08):
    """Weights drawn from U[-scale, scale]."""
    return rng.uniform(-scale, scale, size=shape)
