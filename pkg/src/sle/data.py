"""Seeded synthetic class-conditional mixture datasets.

Each class is an isotropic Gaussian whose mean sits on a sphere of configured
radius; everything is a pure function of the config, so datasets regenerate
bit-identically from their seed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class MixtureDatasetConfig:
    n_classes: int = 8
    d_data: int = 32
    n_per_class: int = 2000
    spread: float = 0.5
    mean_radius: float = 4.0
    seed: int = 0

    def validate(self):
        if self.n_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.n_classes}")
        if self.d_data < 2:
            raise ConfigError(f"need d_data >= 2, got {self.d_data}")
        if self.spread <= 0:
            raise ConfigError(f"spread must be > 0, got {self.spread}")
        if self.n_per_class < 1:
            raise ConfigError(f"n_per_class must be >= 1, got {self.n_per_class}")
        return self


@dataclass
class MixtureDataset:
    config: MixtureDatasetConfig
    x: np.ndarray        # (n_classes * n_per_class, d_data) float32, class-major
    labels: np.ndarray   # (n,) int64
    class_means: np.ndarray  # (n_classes, d_data) float32


def make_mixture(cfg):
    cfg.validate()
    mean_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    dirs = mean_rng.standard_normal((cfg.n_classes, cfg.d_data))
    means = cfg.mean_radius * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    means = means.astype(np.float32)

    chunks, labels = [], []
    for k in range(cfg.n_classes):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1, k)))
        noise = rng.standard_normal((cfg.n_per_class, cfg.d_data)).astype(np.float32)
        chunks.append(means[k] + np.float32(cfg.spread) * noise)
        labels.append(np.full(cfg.n_per_class, k, dtype=np.int64))
    return MixtureDataset(cfg, np.concatenate(chunks), np.concatenate(labels), means)


def precompute_latents(dataset, tok):
    """Encode the whole dataset once with a calibrated tokenizer."""
    if dataset.x.shape[1] != tok.d_data:
        raise ShapeError(
            f"dataset dimension {dataset.x.shape[1]} != tokenizer d_data {tok.d_data}")
    return tok.encode_rows(dataset.x), dataset.labels.copy()
