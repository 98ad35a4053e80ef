"""AdamW with decoupled weight decay, plus EMA shadow tracking.

Parameters are dicts of named float32 arrays; updates are in place through the
active kernel backend.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ShapeError


@dataclass
class OptimizerState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, lr=1e-4, betas=(0.9, 0.95), eps=1e-8, weight_decay=0.0):
        m = {k: np.zeros_like(p) for k, p in params.items()}
        v = {k: np.zeros_like(p) for k, p in params.items()}
        return cls(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps,
                   weight_decay=weight_decay, step=0, m=m, v=v)


def adamw_step(params, grads, state):
    """One bias-corrected AdamW update over all named parameters, in place."""
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ShapeError(f"adamw_step: shape mismatch for {name!r}")
        backend.kernels.adamw_step(
            p, g, state.m[name], state.v[name],
            state.lr, state.beta1, state.beta2, state.eps, state.weight_decay,
            bc1, bc2,
        )


@dataclass
class EmaState:
    decay: float
    shadow: dict

    @classmethod
    def from_params(cls, params, decay):
        if not 0.0 < decay < 1.0:
            raise ValueError(f"ema decay must be in (0,1), got {decay}")
        return cls(decay=decay, shadow={k: p.copy() for k, p in params.items()})


def ema_update(ema, params):
    """shadow <- decay*shadow + (1-decay)*params, elementwise in place."""
    for name, p in params.items():
        s = ema.shadow[name]
        if s.shape != p.shape:
            raise ShapeError(f"ema_update: shape mismatch for {name!r}")
        backend.kernels.ema_step(s, p, ema.decay)
