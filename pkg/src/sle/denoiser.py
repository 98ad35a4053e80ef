"""Class-conditional denoiser over spherical latents.

A residual MLP: input projection to width H, a learned class embedding added
to the first hidden state (row K of the table is the null label used for
unconditional passes), B residual blocks of affine-SiLU-affine, and an output
projection back to the latent dimension. There is deliberately no noise-level
or timestep input anywhere.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ShapeError


@dataclass(frozen=True)
class DenoiserConfig:
    d_latent: int
    n_classes: int
    hidden: int = 256
    blocks: int = 4

    @property
    def null_label(self):
        return self.n_classes


class DenoiserParameters:
    """Named float32 parameter arrays plus the architecture they belong to."""

    def __init__(self, cfg, arrays):
        self.cfg = cfg
        self.arrays = arrays
        expected = set(param_names(cfg))
        got = set(arrays)
        if got != expected:
            raise ShapeError(f"parameter names mismatch: unexpected {sorted(got - expected)}, "
                             f"missing {sorted(expected - got)}")

    @classmethod
    def init(cls, cfg, rng, init_std=0.02):
        h, d = cfg.hidden, cfg.d_latent
        arrays = {}

        def normal(shape):
            return (init_std * rng.standard_normal(shape)).astype(np.float32)

        arrays["in_proj.w"] = normal((d, h))
        arrays["in_proj.b"] = np.zeros(h, dtype=np.float32)
        arrays["embed"] = normal((cfg.n_classes + 1, h))
        for i in range(cfg.blocks):
            arrays[f"block{i}.w1"] = normal((h, h))
            arrays[f"block{i}.b1"] = np.zeros(h, dtype=np.float32)
            arrays[f"block{i}.w2"] = normal((h, h))
            arrays[f"block{i}.b2"] = np.zeros(h, dtype=np.float32)
        arrays["out_proj.w"] = normal((h, d))
        arrays["out_proj.b"] = np.zeros(d, dtype=np.float32)
        return cls(cfg, arrays)

    def copy(self):
        return DenoiserParameters(self.cfg, {k: v.copy() for k, v in self.arrays.items()})

    def leaves(self):
        """Fresh graph leaves sharing the parameter buffers."""
        return {k: ad.Tensor(v) for k, v in self.arrays.items()}

    def n_params(self):
        return sum(int(v.size) for v in self.arrays.values())


def param_names(cfg):
    names = ["in_proj.w", "in_proj.b", "embed"]
    for i in range(cfg.blocks):
        names += [f"block{i}.w1", f"block{i}.b1", f"block{i}.w2", f"block{i}.b2"]
    names += ["out_proj.w", "out_proj.b"]
    return names


def _check_labels(labels, cfg):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() > cfg.null_label):
        raise ValueError(f"label outside [0, {cfg.null_label}]")
    return labels.astype(np.int64)


def forward_graph(leaves, cfg, v, labels):
    """Graph forward over a (n, d_latent) Tensor of spherical latents."""
    h = ad.add(ad.matmul(v, leaves["in_proj.w"]), leaves["in_proj.b"])
    h = ad.add(h, ad.embedding(leaves["embed"], labels))
    for i in range(cfg.blocks):
        t = ad.add(ad.matmul(h, leaves[f"block{i}.w1"]), leaves[f"block{i}.b1"])
        t = ad.silu(t)
        t = ad.add(ad.matmul(t, leaves[f"block{i}.w2"]), leaves[f"block{i}.b2"])
        h = ad.add(h, t)
    return ad.add(ad.matmul(h, leaves["out_proj.w"]), leaves["out_proj.b"])


def forward_rows(params, v, labels):
    """Plain-array forward, same arithmetic as forward_graph (no graph built)."""
    from . import backend

    a = params.arrays
    cfg = params.cfg
    labels = _check_labels(labels, cfg)
    if v.ndim != 2 or v.shape[1] != cfg.d_latent:
        raise ShapeError(f"forward_rows: expected (n, {cfg.d_latent}), got {v.shape}")
    h = (v @ a["in_proj.w"]) + a["in_proj.b"]
    h = h + a["embed"][labels]
    for i in range(cfg.blocks):
        t = (h @ a[f"block{i}.w1"]) + a[f"block{i}.b1"]
        t = backend.kernels.silu_fwd(t)
        t = (t @ a[f"block{i}.w2"]) + a[f"block{i}.b2"]
        h = h + t
    return (h @ a["out_proj.w"]) + a["out_proj.b"]


def denoise(v, y, params):
    """Predict the clean latent for one spherical latent and one label."""
    v = np.asarray(v, dtype=np.float32).reshape(1, -1)
    return forward_rows(params, v, np.asarray([y]))[0]


def cfg_combine(uncond, cond, omega):
    """uncond + omega * (cond - uncond); the omega endpoints are exact."""
    uncond = np.asarray(uncond)
    cond = np.asarray(cond)
    if uncond.shape != cond.shape:
        raise ShapeError(f"cfg_combine: shapes differ {uncond.shape} vs {cond.shape}")
    if omega == 1.0:
        return cond
    if omega == 0.0:
        return uncond
    return uncond + uncond.dtype.type(omega) * (cond - uncond)
