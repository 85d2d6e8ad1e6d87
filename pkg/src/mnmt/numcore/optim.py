"""AdaDelta (Zeiler 2012) and global-norm gradient clipping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch


@dataclass
class AdaDeltaState:
    rho: float = 0.95
    eps: float = 1e-6
    sq_grad: list = field(default_factory=list)
    sq_delta: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @classmethod
    def for_params(cls, params, rho=0.95, eps=1e-6) -> "AdaDeltaState":
        return cls(rho, eps,
                   [np.zeros_like(p.data) for p in params],
                   [np.zeros_like(p.data) for p in params])


def adadelta_step(params, grads, state: AdaDeltaState):
    """Apply one AdaDelta update in place and return ``params``.

    E[g^2] <- rho E[g^2] + (1 - rho) g^2
    dx     <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
    """
    if not (len(params) == len(grads) == len(state.sq_grad)):
        raise ShapeMismatch("params, grads and optimizer state differ in length")
    rho, eps = state.rho, state.eps
    for p, g, eg2, edx2 in zip(params, grads, state.sq_grad, state.sq_delta):
        if p.data.shape != g.shape or g.shape != eg2.shape:
            raise ShapeMismatch(f"adadelta: param {p.data.shape} vs grad {g.shape}")
        eg2 *= rho
        eg2 += (1.0 - rho) * g * g
        dx = -np.sqrt(edx2 + eps) / np.sqrt(eg2 + eps) * g
        edx2 *= rho
        edx2 += (1.0 - rho) * dx * dx
        p.data += dx
    return params


def clip_by_global_norm(grads, max_norm):
    """Scale ``grads`` so their joint L2 norm is at most ``max_norm``.

    Returns the (possibly rescaled) list and the norm before clipping.
    """
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads)))
    if max_norm is None or max_norm <= 0 or norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return [g * scale for g in grads], norm
