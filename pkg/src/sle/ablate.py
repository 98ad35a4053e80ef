"""Controlled ablation grid over the four studied factors.

Axes: noise distribution (uniform baseline vs logit-normal at two mus),
training losses (reconstruction only, plus consistency, plus latent
consistency), latent projection (spherify on/off), and sampling steps. Within
an axis all arms share every seed except the ablated factor; the default arm
(logit-normal(+0.4,1), R+C, spherify on) is trained once per seed and reused
across axes. Emits ablate.csv with one toy-FID row per (axis, arm, seed).
"""

import os
from dataclasses import replace

from .data import make_mixture, precompute_latents
from .denoiser import DenoiserConfig, DenoiserParameters
from .evaluation import evaluate
from .sphere import NoiseDistConfig
from .tokenizer import LinearTokenizer, calibrate_scale
from .trainer import train


def _train_arm(run_cfg, z, labels, train_cfg):
    model_cfg = DenoiserConfig(
        d_latent=run_cfg["tokenizer.d_latent"], n_classes=run_cfg["data.n_classes"],
        hidden=run_cfg["model.hidden"], blocks=run_cfg["model.blocks"])
    state, _ = train(z, labels, model_cfg, train_cfg)
    return DenoiserParameters(model_cfg, dict(state.ema.shadow))


def _eval_arm(params, tok, run_cfg, dataset, steps, spherify=True):
    cfg = run_cfg.sampler_config(steps=steps)
    cfg.spherify = spherify
    n = run_cfg["ablate.eval_n"]
    n -= n % dataset.config.n_classes
    return evaluate(params, tok, cfg, dataset, n)["toy_fid"]


def run_ablation(run_cfg):
    out_dir = run_cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    data_cfg = replace(run_cfg.dataset_config(), n_per_class=run_cfg["ablate.n_per_class"])
    dataset = make_mixture(data_cfg)
    raw_tok = LinearTokenizer.create(run_cfg["data.d_data"], run_cfg["tokenizer.d_latent"],
                                     run_cfg["tokenizer.seed"])
    tok = raw_tok.with_scale(calibrate_scale(raw_tok.encode_rows(dataset.x)))
    z, labels = precompute_latents(dataset, tok)

    base_train = run_cfg.train_config()
    base_train.epochs = run_cfg["ablate.epochs"]
    base_train.batch_size = run_cfg["ablate.batch_size"]
    seeds = run_cfg["ablate.seeds"]
    eval_steps = run_cfg["sample.steps"]
    rows = []

    def add(axis, arm, seed, steps, fid):
        rows.append({"axis": axis, "arm": arm, "seed": seed, "steps": steps,
                     "toy_fid": fid})

    noise_arms = {
        "uniform_baseline": NoiseDistConfig(kind="uniform_baseline",
                                            sigma_max=run_cfg["noise.sigma_max"]),
        "lognorm(-0.4,1.0)": replace(run_cfg.noise_config(), mu=-0.4),
        "lognorm(+0.4,1.0)": replace(run_cfg.noise_config(), mu=+0.4),
    }
    default_params = {}
    for seed in seeds:
        for arm, noise_cfg in noise_arms.items():
            cfg = replace(base_train, seed=seed, noise=noise_cfg)
            params = _train_arm(run_cfg, z, labels, cfg)
            if arm == "lognorm(+0.4,1.0)":
                default_params[seed] = params
            add("noise", arm, seed, eval_steps,
                _eval_arm(params, tok, run_cfg, dataset, eval_steps))

    seed0 = seeds[0]
    w = run_cfg.loss_weights()
    loss_arms = {
        "R": replace(w, l1_cons=0.0, cos_cons=0.0, latent_cons=0.0),
        "R+C": replace(w, latent_cons=0.0),
        "R+C+L": replace(w, latent_cons=1.0),
    }
    for arm, weights in loss_arms.items():
        if arm == "R+C":
            params = default_params[seed0]
        else:
            params = _train_arm(run_cfg, z, labels,
                                replace(base_train, seed=seed0, weights=weights))
        add("losses", arm, seed0, eval_steps,
            _eval_arm(params, tok, run_cfg, dataset, eval_steps))

    add("spherify", "on", seed0, eval_steps,
        _eval_arm(default_params[seed0], tok, run_cfg, dataset, eval_steps))
    off_params = _train_arm(run_cfg, z, labels,
                            replace(base_train, seed=seed0, spherify=False))
    add("spherify", "off", seed0, eval_steps,
        _eval_arm(off_params, tok, run_cfg, dataset, eval_steps, spherify=False))

    for steps in run_cfg["ablate.steps"]:
        add("steps", str(steps), seed0, steps,
            _eval_arm(default_params[seed0], tok, run_cfg, dataset, steps))

    out = os.path.join(out_dir, "ablate.csv")
    with open(out, "w", encoding="utf-8") as f:
        f.write("axis,arm,seed,steps,toy_fid\n")
        for r in rows:
            f.write(f"{r['axis']},{r['arm']},{r['seed']},{r['steps']},{r['toy_fid']!r}\n")
    return out
