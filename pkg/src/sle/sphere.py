"""Spherical-latent projection, noise injection, and noise-level samplers.

``spherify`` flattens a latent and scales it to unit root-mean-square norm.
Noise-level pairs (sigma, sigma_sub) with sigma >= sigma_sub come from either
two order-statistics of a logit-normal (scaled into a range, with a small
probability of bumping sigma into a high "mix" band) or the uniform baseline
sigma ~ U(0, sigma_max), sigma_sub ~ U(0, sigma/2).
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .autodiff import RMSNORM_EPS
from .errors import ConfigError, DegenerateInputError, ShapeError

DEGENERATE_MEAN_SQUARE = 1e-12


def spherify(z, eps=RMSNORM_EPS):
    """Flatten and project to unit mean-square norm. Raises on near-zero input."""
    z = np.asarray(z)
    if z.size == 0:
        raise ShapeError("spherify: empty input")
    flat = np.ascontiguousarray(z.reshape(-1))
    if np.mean(flat.astype(np.float64) ** 2) < DEGENERATE_MEAN_SQUARE:
        raise DegenerateInputError("spherify: input mean-square below 1e-12")
    out, _ = backend.kernels.rmsnorm_fwd(flat, eps)
    return out


def spherify_rows(z, eps=RMSNORM_EPS):
    """Row-wise spherify for a (n, d) batch."""
    if z.ndim != 2 or z.size == 0:
        raise ShapeError(f"spherify_rows: need nonempty 2-D input, got {z.shape}")
    ms = np.mean(z.astype(np.float64) ** 2, axis=1)
    if np.any(ms < DEGENERATE_MEAN_SQUARE):
        bad = int(np.argmin(ms))
        raise DegenerateInputError(f"spherify_rows: row {bad} mean-square below 1e-12")
    out, _ = backend.kernels.rmsnorm_fwd(np.ascontiguousarray(z), eps)
    return out


def perturb(v, sigma, noise):
    """spherify(v + sigma*noise); noise must match v's shape."""
    v = np.asarray(v)
    noise = np.asarray(noise)
    if v.shape != noise.shape:
        raise ShapeError(f"perturb: noise shape {noise.shape} != latent shape {v.shape}")
    if sigma < 0:
        raise ValueError(f"perturb: sigma must be >= 0, got {sigma}")
    return spherify(v + v.dtype.type(sigma) * noise)


def perturb_rows(v, sigma, noise):
    """Row-wise perturb; sigma is a scalar or per-row vector."""
    if v.shape != noise.shape:
        raise ShapeError(f"perturb_rows: noise shape {noise.shape} != {v.shape}")
    s = np.asarray(sigma, dtype=v.dtype)
    if s.ndim == 1:
        s = s[:, None]
    return spherify_rows(v + s * noise)


@dataclass
class NoiseDistConfig:
    kind: str = "logit_normal"  # or "uniform_baseline"
    mu: float = 0.4
    s: float = 1.0
    sigma_range: tuple = (0.0, 85.0)
    mix_range: tuple = (85.0, 89.0)
    mix_probability: float = 0.2
    sigma_max: float = 85.0  # uniform_baseline only

    def validate(self):
        if self.kind not in ("logit_normal", "uniform_baseline"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        lo, hi = self.sigma_range
        lo2, hi2 = self.mix_range
        if not (lo <= hi <= lo2 <= hi2):
            raise ConfigError(
                f"noise ranges must satisfy lo<=hi<=mix_lo<=mix_hi, "
                f"got [{lo},{hi}] and [{lo2},{hi2}]")
        if not 0.0 <= self.mix_probability <= 1.0:
            raise ConfigError(f"mix_probability must be in [0,1], got {self.mix_probability}")
        if self.kind == "uniform_baseline" and self.sigma_max < 0:
            raise ConfigError(f"sigma_max must be >= 0, got {self.sigma_max}")
        return self


def sample_noise_pairs(cfg, n, rng):
    """Draw n (sigma, sigma_sub) pairs. Returns two float32 arrays of length n.

    logit_normal: u = logistic(N(mu, s^2)) mapped affinely into sigma_range;
    with mix_probability the first draw is replaced by U(mix_range); the pair
    is then ordered so sigma >= sigma_sub. uniform_baseline: sigma ~
    U(0, sigma_max) and sigma_sub ~ U(0, sigma/2).
    """
    cfg.validate()
    if cfg.kind == "logit_normal":
        z = rng.normal(cfg.mu, cfg.s, size=(n, 2))
        mix_u = rng.random(n)
        lo2, hi2 = cfg.mix_range
        mix_val = rng.uniform(lo2, hi2, size=n)
        u = 1.0 / (1.0 + np.exp(-z))
        lo, hi = cfg.sigma_range
        s12 = lo + u * (hi - lo)
        first = np.where(mix_u < cfg.mix_probability, mix_val, s12[:, 0])
        sigma = np.maximum(first, s12[:, 1])
        sigma_sub = np.minimum(first, s12[:, 1])
    else:
        sigma = rng.uniform(0.0, cfg.sigma_max, size=n)
        sigma_sub = rng.uniform(0.0, 0.5 * sigma)
    return sigma.astype(np.float32), sigma_sub.astype(np.float32)


def sample_noise_pair(cfg, rng):
    """Single (sigma, sigma_sub) pair as floats."""
    sigma, sub = sample_noise_pairs(cfg, 1, rng)
    return float(sigma[0]), float(sub[0])


def decay_factor(t, steps, gamma):
    """Re-noising multiplier r = (1 - (t+1)/T)^gamma, zero at the final step."""
    if not 0 <= t < steps:
        raise ValueError(f"decay_factor: step index {t} outside [0, {steps})")
    if gamma <= 0:
        raise ValueError(f"decay_factor: gamma must be > 0, got {gamma}")
    return (1.0 - (t + 1) / steps) ** gamma
