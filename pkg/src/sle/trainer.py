"""Deterministic training loop.

All randomness in epoch e comes from streams derived from (seed, e), so a run
resumed from an epoch-boundary checkpoint reproduces the uninterrupted run
bit-exactly. The loop owns parameter mutation; the tokenizer is never touched.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import objectives, sphere
from .denoiser import DenoiserParameters
from .errors import ConfigError, DivergenceError
from .optim import EmaState, OptimizerState, adamw_step, ema_update

# spawn-key tags for the per-purpose RNG streams
_INIT, _EPOCH, _LATCONS = 0, 1, 2


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 256
    lr: float = 1e-4
    weight_decay: float = 0.0
    betas: tuple = (0.9, 0.95)
    ema_decay: float = 0.9995
    seed: int = 0
    checkpoint_every: int = 0  # epochs; 0 disables periodic checkpoints
    spherify: bool = True
    noise: sphere.NoiseDistConfig = field(default_factory=sphere.NoiseDistConfig)
    weights: objectives.LossWeights = field(default_factory=objectives.LossWeights)

    def validate(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if not 0.0 < self.ema_decay < 1.0:
            raise ConfigError(f"ema_decay must be in (0,1), got {self.ema_decay}")
        self.noise.validate()
        self.weights.validate()
        return self


@dataclass
class TrainState:
    params: DenoiserParameters
    opt: OptimizerState
    ema: EmaState
    epoch: int = 0        # epochs completed so far
    global_step: int = 0


def init_state(model_cfg, cfg):
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_INIT,)))
    params = DenoiserParameters.init(model_cfg, rng)
    opt = OptimizerState.for_params(params.arrays, lr=cfg.lr, betas=cfg.betas,
                                    weight_decay=cfg.weight_decay)
    ema = EmaState.from_params(params.arrays, cfg.ema_decay)
    return TrainState(params=params, opt=opt, ema=ema)


def train_step(z_batch, labels, state, cfg, rng, latcons_rng=None, step_index=None):
    """One forward/backward, AdamW update, and EMA update. Returns the breakdown."""
    pairs = sphere.sample_noise_pairs(cfg.noise, z_batch.shape[0], rng)
    breakdown, total, leaves = objectives.training_losses(
        z_batch, labels, pairs, state.params, cfg.weights, rng,
        latcons_rng=latcons_rng, project=cfg.spherify)
    if not np.isfinite(breakdown.total):
        where = "" if step_index is None else f" at step {step_index}"
        raise DivergenceError(f"non-finite training loss{where}: {breakdown.total}")
    ad.backward(total)
    grads = {name: (t.grad if t.grad is not None else np.zeros_like(t.data))
             for name, t in leaves.items()}
    adamw_step(state.params.arrays, grads, state.opt)
    ema_update(state.ema, state.params.arrays)
    state.global_step += 1
    return breakdown


def train(z, labels, model_cfg, cfg, state=None, on_epoch=None):
    """Train over pre-encoded latents. Returns (TrainState, metrics rows).

    Pass a resumed TrainState to continue from an epoch boundary; per-epoch
    metric rows are dicts matching the train.csv columns.
    """
    cfg.validate()
    if labels.size and int(labels.max()) >= model_cfg.n_classes:
        raise ConfigError(f"dataset has label {int(labels.max())} "
                          f"but the model was built for {model_cfg.n_classes} classes")
    if state is None:
        state = init_state(model_cfg, cfg)
    n = z.shape[0]
    metrics = []
    for epoch in range(state.epoch, cfg.epochs):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_EPOCH, epoch)))
        latcons_rng = None
        if cfg.weights.latent_cons > 0:
            latcons_rng = np.random.default_rng(
                np.random.SeedSequence(cfg.seed, spawn_key=(_LATCONS, epoch)))
        perm = rng.permutation(n)
        sums = np.zeros(6, dtype=np.float64)
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            b = train_step(z[idx], labels[idx], state, cfg, rng,
                           latcons_rng=latcons_rng, step_index=state.global_step)
            sums += (b.recon_l1, b.recon_cos, b.cons_l1, b.cons_cos, b.latent_cons, b.total)
            n_batches += 1
        state.epoch = epoch + 1
        row = dict(zip(
            ("recon_l1", "recon_cos", "cons_l1", "cons_cos", "latent_cons", "total"),
            (sums / max(n_batches, 1)).tolist()))
        row["epoch"] = epoch
        metrics.append(row)
        if on_epoch is not None:
            on_epoch(epoch, state, row)
    return state, metrics
