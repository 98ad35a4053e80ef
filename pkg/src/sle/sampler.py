"""Iterative latent sampling with classifier-free guidance.

Starting from Gaussian z, each step projects onto the unit-RMS sphere, runs
the guided denoiser, re-projects the guided prediction, and re-injects a
decaying amount of the noise drawn once before the loop. The decoder runs
exactly once, after the loop; the encoder is never used. With omega == 1 the
unconditional pass is skipped (the guidance combination reduces to the
conditional prediction).
"""

from dataclasses import dataclass

import numpy as np

from . import sphere
from .denoiser import cfg_combine, forward_rows
from .errors import ConfigError, DegenerateInputError, SamplingError


@dataclass
class SamplerConfig:
    steps: int = 4
    sigma_max: float = 24.0
    omega: float = 1.0
    gamma: float = 0.5
    fresh_eps_per_step: bool = False
    seed: int = 0
    spherify: bool = True

    def validate(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.sigma_max < 0:
            raise ConfigError(f"sigma_max must be >= 0, got {self.sigma_max}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        return self


def _draw_init(rng, d_latent, cfg):
    """Initial z and the re-noising eps draws for one sample, in a fixed order."""
    z0 = rng.standard_normal(d_latent).astype(np.float32)
    n_eps = cfg.steps if cfg.fresh_eps_per_step else 1
    eps = rng.standard_normal((n_eps, d_latent)).astype(np.float32)
    return z0, eps


def _run_loop(z, eps, labels, params, tok, cfg):
    """Vectorized sampling loop over a batch; rows are independent."""
    null = params.cfg.null_label
    proj = sphere.spherify_rows if cfg.spherify else (lambda a: a)
    for t in range(cfg.steps):
        try:
            v = proj(z)
            cond = forward_rows(params, v, labels)
            if cfg.omega == 1.0:
                z_guided = cond
            else:
                uncond = forward_rows(params, v, np.full(labels.shape, null, dtype=np.int64))
                z_guided = cfg_combine(uncond, cond, cfg.omega)
            v_prime = proj(z_guided)
        except DegenerateInputError as exc:
            raise SamplingError(f"degenerate latent at step {t}: {exc}") from exc
        r = sphere.decay_factor(t, cfg.steps, cfg.gamma)
        if r > 0.0:
            e = eps[:, t if cfg.fresh_eps_per_step else 0]
            z = v_prime + np.float32(cfg.sigma_max * r) * e
        else:
            z = v_prime
    return tok.decode_rows(z)


def sample_one(y, params, tok, cfg, rng=None):
    """Run the sampling loop for a single label; returns a data-space vector."""
    cfg.validate()
    _check_labels(np.asarray([y]), params, cfg)
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(int(y), 0)))
    z0, eps = _draw_init(rng, params.cfg.d_latent, cfg)
    out = _run_loop(z0[None, :], eps[None, :, :],
                    np.asarray([y], dtype=np.int64), params, tok, cfg)
    return out[0]


def sample_batch(labels, params, tok, cfg):
    """Independent samples, one per label.

    Each sample's RNG substream is keyed by (seed, label, occurrence-of-label),
    so results do not depend on batch composition: permuting the label list
    permutes the outputs identically whenever equal labels keep their relative
    order (they are interchangeable draws otherwise).
    """
    cfg.validate()
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("sample_batch: empty label list")
    _check_labels(labels, params, cfg)
    d = params.cfg.d_latent
    n = labels.size
    n_eps = cfg.steps if cfg.fresh_eps_per_step else 1
    z0 = np.empty((n, d), dtype=np.float32)
    eps = np.empty((n, n_eps, d), dtype=np.float32)
    seen = {}
    for i, y in enumerate(labels.tolist()):
        occ = seen.get(y, 0)
        seen[y] = occ + 1
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(y, occ)))
        z0[i], eps[i] = _draw_init(rng, d, cfg)
    return _run_loop(z0, eps, labels, params, tok, cfg)


def _check_labels(labels, params, cfg):
    null = params.cfg.null_label
    if labels.min() < 0 or labels.max() > null:
        raise ValueError(f"label outside [0, {null}]")
    if cfg.omega != 1.0 and np.any(labels == null):
        raise ValueError("null label cannot be sampled with guidance (omega != 1)")
