"""Latent-space training losses.

Reconstruction pulls the prediction from the low-noise latent toward the clean
latent; consistency pulls the prediction from the high-noise latent toward a
stop-gradient copy of the low-noise prediction; both combine a mean-L1 term
and a cosine-distance term. The optional latent-consistency term re-noises the
model's own spherified prediction and compares the two predictions by cosine
distance (weight 0 disables it entirely).
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import denoiser as dn
from . import sphere
from .errors import ShapeError


@dataclass
class LossWeights:
    l1_recon: float = 50.0
    l1_cons: float = 25.0
    cos_recon: float = 1.0
    cos_cons: float = 1.0
    latent_cons: float = 0.0
    cls_drop_prob: float = 0.1

    def validate(self):
        for name in ("l1_recon", "l1_cons", "cos_recon", "cos_cons", "latent_cons"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be >= 0")
        if not 0.0 <= self.cls_drop_prob <= 1.0:
            raise ValueError(f"cls_drop_prob must be in [0,1], got {self.cls_drop_prob}")
        return self


@dataclass
class LossBreakdown:
    recon_l1: float
    recon_cos: float
    cons_l1: float
    cons_cos: float
    latent_cons: float
    total: float


def cosine_loss(a, b):
    """1 - cos(a, b) for vectors; mean over rows for 2-D inputs."""
    node = ad.cosine_loss(ad.leaf(a), ad.leaf(b))
    return float(node.data)


def recon_loss(pred, z, w):
    """w.l1_recon * mean|pred - z| + w.cos_recon * cosine_loss(pred, z)."""
    if np.shape(pred) != np.shape(z):
        raise ShapeError(f"recon_loss: shapes differ {np.shape(pred)} vs {np.shape(z)}")
    p, t = ad.leaf(pred), ad.leaf(z)
    node = ad.add(ad.scale(ad.l1_loss(p, t), w.l1_recon),
                  ad.scale(ad.cosine_loss(p, t), w.cos_recon))
    return float(node.data)


def consistency_loss(pred_big, pred_small, w):
    """Weighted L1+cosine between pred_big and sg(pred_small); returns a graph node.

    The stop-gradient is applied here, so no gradient flows through the
    pred_small branch.
    """
    if pred_big.data.shape != pred_small.data.shape:
        raise ShapeError(
            f"consistency_loss: shapes differ {pred_big.data.shape} vs {pred_small.data.shape}")
    target = ad.stop_gradient(pred_small)
    return ad.add(ad.scale(ad.l1_loss(pred_big, target), w.l1_cons),
                  ad.scale(ad.cosine_loss(pred_big, target), w.cos_cons))


def latent_consistency_loss(v_noisy_big, sigma, params, rng, labels=None):
    """Cosine distance between G's prediction and its prediction after the
    spherified prediction is re-noised at the same sigma. Standalone entry
    point; returns a float."""
    v = np.asarray(v_noisy_big, dtype=np.float32)
    v2 = v if v.ndim == 2 else v.reshape(1, -1)
    n = v2.shape[0]
    if labels is None:
        labels = np.full(n, params.cfg.null_label, dtype=np.int64)
    sig = np.broadcast_to(np.asarray(sigma, dtype=np.float32), (n,))
    leaves = params.leaves()
    pred = dn.forward_graph(leaves, params.cfg, ad.leaf(v2), labels)
    node = _latent_consistency_graph(leaves, params.cfg, pred, sig, labels, rng)
    return float(node.data)


def _latent_consistency_graph(leaves, cfg, pred_big, sigma, labels, rng):
    """pred_big is the graph node for G(v_NOISY); gradient flows through both passes."""
    v_refined = ad.rms_normalize(pred_big)
    eps = rng.standard_normal(pred_big.data.shape).astype(np.float32)
    v_renoisy = ad.rms_normalize(ad.add_const(v_refined, sigma[:, None] * eps))
    pred_again = dn.forward_graph(leaves, cfg, v_renoisy, labels)
    return ad.cosine_loss(pred_again, pred_big)


def training_losses(z, labels, pairs, params, w, rng, latcons_rng=None, project=True):
    """Per-batch objective. Returns (LossBreakdown, total graph node, leaves).

    Per example: one shared eps corrupts the clean latent at both sigma levels
    of its pair; with probability cls_drop_prob the label is replaced by the
    null label for every forward pass of that example. Components in the
    breakdown are unweighted; total is the weighted sum.
    """
    w.validate()
    z = np.asarray(z, dtype=np.float32)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ShapeError(f"training_losses: need a nonempty (n, d) batch, got {z.shape}")
    n = z.shape[0]
    sigma, sigma_sub = pairs
    labels = dn._check_labels(labels, params.cfg)

    eps = rng.standard_normal(z.shape).astype(np.float32)
    if w.cls_drop_prob > 0:
        drop = rng.random(n) < w.cls_drop_prob
        labels = np.where(drop, params.cfg.null_label, labels)
    x_small = z + np.asarray(sigma_sub, dtype=np.float32)[:, None] * eps
    x_big = z + np.asarray(sigma, dtype=np.float32)[:, None] * eps
    if project:
        v_small = sphere.spherify_rows(x_small)
        v_big = sphere.spherify_rows(x_big)
    else:
        v_small, v_big = x_small, x_big

    leaves = params.leaves()
    both = ad.leaf(np.concatenate([v_small, v_big], axis=0))
    pred = dn.forward_graph(leaves, params.cfg, both, np.concatenate([labels, labels]))
    pred_small = ad.slice_rows(pred, 0, n)
    pred_big = ad.slice_rows(pred, n, 2 * n)

    z_leaf = ad.leaf(z)
    recon_l1 = ad.l1_loss(pred_small, z_leaf)
    recon_cos = ad.cosine_loss(pred_small, z_leaf)
    target = ad.stop_gradient(pred_small)
    cons_l1 = ad.l1_loss(pred_big, target)
    cons_cos = ad.cosine_loss(pred_big, target)

    total = ad.add(ad.add(ad.scale(recon_l1, w.l1_recon), ad.scale(recon_cos, w.cos_recon)),
                   ad.add(ad.scale(cons_l1, w.l1_cons), ad.scale(cons_cos, w.cos_cons)))
    lat_val = 0.0
    if w.latent_cons > 0:
        lat_rng = latcons_rng if latcons_rng is not None else rng
        lat = _latent_consistency_graph(
            leaves, params.cfg, pred_big, np.asarray(sigma, dtype=np.float32), labels, lat_rng)
        total = ad.add(total, ad.scale(lat, w.latent_cons))
        lat_val = float(lat.data)

    breakdown = LossBreakdown(
        recon_l1=float(recon_l1.data), recon_cos=float(recon_cos.data),
        cons_l1=float(cons_l1.data), cons_cos=float(cons_cos.data),
        latent_cons=lat_val, total=float(total.data),
    )
    return breakdown, total, leaves
