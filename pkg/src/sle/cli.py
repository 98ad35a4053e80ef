"""Command-line interface: train / sample / eval / cost / ablate.

Exit codes: 0 success, 1 runtime failure, 2 configuration error. SLE_THREADS
caps BLAS worker threads (0 or unset = automatic) and must be applied before
numpy loads, which is why this module touches the environment at import time.
"""

import argparse
import os
import sys

_threads = os.environ.get("SLE_THREADS")
if _threads and _threads != "0":
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, _threads)

import numpy as np

from . import checkpoint, cost
from .config import load_run_config, run_config_from_flat
from .data import make_mixture, precompute_latents
from .denoiser import DenoiserConfig, DenoiserParameters, param_names
from .errors import ConfigError
from .evaluation import GaussianSummary, evaluate, frechet_distance
from .optim import EmaState, OptimizerState
from .sampler import sample_batch
from .tokenizer import LinearTokenizer, calibrate_scale
from .trainer import TrainState, train

TRAIN_CSV_COLUMNS = ("epoch", "recon_l1", "recon_cos", "cons_l1", "cons_cos",
                     "latent_cons", "total")
EVAL_CSV_COLUMNS = ("run_id", "steps", "omega", "gamma", "toy_fid", "mmd2", "class_acc")
ABLATE_CSV_COLUMNS = ("axis", "arm", "seed", "steps", "toy_fid")


def _model_config(run_cfg):
    return DenoiserConfig(
        d_latent=run_cfg["tokenizer.d_latent"], n_classes=run_cfg["data.n_classes"],
        hidden=run_cfg["model.hidden"], blocks=run_cfg["model.blocks"])


def _state_arrays(state, tok):
    arrays = {}
    for name, arr in state.params.arrays.items():
        arrays[name] = arr
        arrays[f"ema.{name}"] = state.ema.shadow[name]
        arrays[f"opt.m.{name}"] = state.opt.m[name]
        arrays[f"opt.v.{name}"] = state.opt.v[name]
    arrays["tokenizer.w"] = tok.w
    arrays["tokenizer.scale"] = np.asarray([tok.scale], dtype=np.float32)
    return arrays


def save_state(path, run_cfg, state, tok):
    rng_state = {"epoch": state.epoch, "global_step": state.global_step,
                 "opt_step": state.opt.step}
    checkpoint.save(path, _state_arrays(state, tok), config=run_cfg.flat(),
                    rng_state=rng_state)


def load_state(path):
    """Returns (run_cfg, TrainState, tokenizer)."""
    arrays, flat, rng_state = checkpoint.load(path)
    run_cfg = run_config_from_flat(flat)
    model_cfg = _model_config(run_cfg)
    base_names = set(param_names(model_cfg))
    expected = set(base_names)
    expected |= {f"ema.{n}" for n in base_names}
    expected |= {f"opt.m.{n}" for n in base_names}
    expected |= {f"opt.v.{n}" for n in base_names}
    expected |= {"tokenizer.w", "tokenizer.scale"}
    unknown = set(arrays) - expected
    if unknown:
        raise ValueError(f"{path}: unknown array names {sorted(unknown)}")
    missing = expected - set(arrays)
    if missing:
        raise ValueError(f"{path}: missing arrays {sorted(missing)}")

    params = DenoiserParameters(model_cfg, {n: arrays[n] for n in base_names})
    train_cfg = run_cfg.train_config()
    opt = OptimizerState(lr=train_cfg.lr, beta1=train_cfg.betas[0],
                         beta2=train_cfg.betas[1], weight_decay=train_cfg.weight_decay,
                         step=int(rng_state["opt_step"]),
                         m={n: arrays[f"opt.m.{n}"] for n in base_names},
                         v={n: arrays[f"opt.v.{n}"] for n in base_names})
    ema = EmaState(decay=train_cfg.ema_decay,
                   shadow={n: arrays[f"ema.{n}"] for n in base_names})
    state = TrainState(params=params, opt=opt, ema=ema,
                       epoch=int(rng_state["epoch"]),
                       global_step=int(rng_state["global_step"]))
    tok = LinearTokenizer(arrays["tokenizer.w"], float(arrays["tokenizer.scale"][0]))
    return run_cfg, state, tok


def _sampling_params(state, use_ema, model_cfg):
    if use_ema:
        return DenoiserParameters(model_cfg, dict(state.ema.shadow))
    return state.params


def _write_csv(path, columns, rows, append=False):
    exists = os.path.exists(path)
    mode = "a" if append and exists else "w"
    with open(path, mode, encoding="utf-8") as f:
        if mode == "w":
            f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                             for c in columns) + "\n")


def _build_training_inputs(run_cfg):
    dataset = make_mixture(run_cfg.dataset_config())
    raw_tok = LinearTokenizer.create(run_cfg["data.d_data"],
                                     run_cfg["tokenizer.d_latent"],
                                     run_cfg["tokenizer.seed"])
    scale = calibrate_scale(raw_tok.encode_rows(dataset.x))
    tok = raw_tok.with_scale(scale)
    z, labels = precompute_latents(dataset, tok)
    return dataset, tok, z, labels


def cmd_train(args):
    run_cfg = load_run_config(args.config)
    out_dir = run_cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    dataset, tok, z, labels = _build_training_inputs(run_cfg)
    checkpoint.save(os.path.join(out_dir, "latents.ckpt"),
                    {"z": z, "labels": labels.astype(np.float32)},
                    config=run_cfg.flat())

    model_cfg = _model_config(run_cfg)
    train_cfg = run_cfg.train_config()
    state = None
    if args.resume:
        _, state, resumed_tok = load_state(args.resume)
        if not np.array_equal(resumed_tok.w, tok.w):
            raise ValueError("resume checkpoint was built with a different tokenizer")

    every = train_cfg.checkpoint_every

    def on_epoch(epoch, st, row):
        if every > 0 and (epoch + 1) % every == 0:
            save_state(os.path.join(out_dir, f"epoch_{epoch + 1:05d}.ckpt"),
                       run_cfg, st, tok)

    state, metrics = train(z, labels, model_cfg, train_cfg, state=state, on_epoch=on_epoch)
    save_state(os.path.join(out_dir, "final.ckpt"), run_cfg, state, tok)
    _write_csv(os.path.join(out_dir, "train.csv"), TRAIN_CSV_COLUMNS, metrics)
    print(f"trained {train_cfg.epochs} epochs -> {os.path.join(out_dir, 'final.ckpt')}")
    return 0


def cmd_sample(args):
    run_cfg, state, tok = load_state(args.checkpoint)
    model_cfg = _model_config(run_cfg)
    n_classes = model_cfg.n_classes
    if not 0 <= args.label < n_classes:
        raise ValueError(f"label {args.label} outside [0, {n_classes})")
    cfg = run_cfg.sampler_config(steps=args.steps, omega=args.omega, gamma=args.gamma,
                                 sigma_max=args.sigma_max, seed=args.seed)
    if args.fresh_eps:
        cfg.fresh_eps_per_step = True
    use_ema = {"ema": True, "raw": False}[args.weights]
    params = _sampling_params(state, use_ema, model_cfg)

    header = [
        f"# steps = {cfg.steps}", f"# sigma_max = {cfg.sigma_max!r}",
        f"# omega = {cfg.omega!r}", f"# gamma = {cfg.gamma!r}",
        f"# label = {args.label}", f"# n = {args.n}", f"# seed = {cfg.seed}",
        f"# fresh_eps = {cfg.fresh_eps_per_step}", f"# weights = {args.weights}",
        f"# run_id = {run_cfg.run_id}",
    ]
    lines = list(header)
    lines.append("label," + ",".join(f"x{i}" for i in range(tok.d_data)))
    if args.n > 0:
        xs = sample_batch(np.full(args.n, args.label, dtype=np.int64), params, tok, cfg)
        for row in xs:
            lines.append(f"{args.label}," + ",".join(repr(float(v)) for v in row))
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    print(f"wrote {args.n} samples to {args.out}")
    return 0


def _reference_stats(run_cfg, dataset, out_dir):
    """Gaussian stats of the training set, cached on disk keyed by dataset seed."""
    path = os.path.join(out_dir, f"ref_stats_seed{dataset.config.seed}.npz")
    if os.path.exists(path):
        cached = np.load(path)
        return GaussianSummary(mean=cached["mean"], cov=cached["cov"])
    stats = GaussianSummary.fit(dataset.x.astype(np.float64))
    os.makedirs(out_dir, exist_ok=True)
    np.savez(path, mean=stats.mean, cov=stats.cov)
    return stats


def cmd_eval(args):
    run_cfg, state, tok = load_state(args.checkpoint)
    model_cfg = _model_config(run_cfg)
    dataset = make_mixture(run_cfg.dataset_config())
    out_dir = os.path.dirname(os.path.abspath(args.checkpoint))
    ref_stats = _reference_stats(run_cfg, dataset, out_dir)
    cfg = run_cfg.sampler_config(steps=args.steps, omega=args.omega,
                                 gamma=args.gamma, seed=args.seed)
    n = args.n if args.n is not None else run_cfg["eval.n_samples"]
    if n % dataset.config.n_classes != 0:
        raise ValueError(f"n = {n} not divisible by {dataset.config.n_classes} classes")

    if args.self_reference:
        fresh = GaussianSummary.fit(dataset.x.astype(np.float64))
        record = {"toy_fid": frechet_distance(fresh, ref_stats), "mmd2": 0.0,
                  "class_acc": 1.0}
    else:
        params = _sampling_params(state, run_cfg["sample.use_ema"], model_cfg)
        record = evaluate(params, tok, cfg, dataset, n, ref_stats=ref_stats)

    row = {"run_id": run_cfg.run_id, "steps": cfg.steps, "omega": cfg.omega,
           "gamma": cfg.gamma, **record}
    out = args.out or os.path.join(out_dir, "eval.csv")
    _write_csv(out, EVAL_CSV_COLUMNS, [row], append=True)
    print(f"toy_fid={record['toy_fid']:.6g} mmd2={record['mmd2']:.6g} "
          f"class_acc={record['class_acc']:.4f} -> {out}")
    return 0


def _cost_row(name, steps, cfg_enabled, computed, published):
    status = ""
    if published is not None:
        ok = abs(computed - published) <= 0.01 * published
        status = "PASS" if ok else "FAIL"
    return {"pipeline": name, "steps": steps, "cfg": int(cfg_enabled),
            "computed_gflops": round(computed, 3),
            "published_gflops": "" if published is None else published,
            "status": status}


def cmd_cost(args):
    rows = []
    if args.mode == "paper":
        comp = cost.PAPER_COMPONENTS
        full_latent = cost.flops_latent_pipeline(
            args.steps, args.cfg, comp["latent_denoiser"], comp["latent_decoder"])
        full_pixel = cost.flops_pixel_loop_pipeline(
            args.steps, args.cfg, comp["pixel_loop_encoder"], comp["pixel_loop_decoder"])
        pub_latent = cost.PAPER_TOTAL_LATENT_T6_CFG if (args.steps, args.cfg) == (6, True) else None
        pub_pixel = cost.PAPER_TOTAL_PIXEL_LOOP_T4_CFG if (args.steps, args.cfg) == (4, True) else None
        rows.append(_cost_row("latent", args.steps, args.cfg, full_latent.total, pub_latent))
        rows.append(_cost_row("pixel_loop", args.steps, args.cfg, full_pixel.total, pub_pixel))

        den_s, dec_s = cost.solve_small_latent_components()
        enc_p, dec_p = cost.solve_small_pixel_loop_components()
        for t, published in cost.PAPER_SMALL_LATENT_TOTALS.items():
            rep = cost.flops_latent_pipeline(t, False, den_s, dec_s)
            rows.append(_cost_row("latent_small", t, False, rep.total, published))
        for t, published in cost.PAPER_SMALL_PIXEL_LOOP_TOTALS.items():
            rep = cost.flops_pixel_loop_pipeline(t, False, enc_p, dec_p)
            rows.append(_cost_row("pixel_loop_small", t, False, rep.total, published))
    else:
        if not args.ckpt:
            raise ConfigError("toy mode needs --ckpt")
        run_cfg, state, tok = load_state(args.ckpt)
        den = cost.flops_toy_model(state.params)
        dec = cost.flops_toy_model(tok)
        rep = cost.flops_latent_pipeline(args.steps, args.cfg, den, dec)
        rows.append({"pipeline": "toy_latent", "steps": args.steps, "cfg": int(args.cfg),
                     "computed_gflops": rep.total / 1e9, "published_gflops": "",
                     "status": ""})
        for name, sub in rep.subtotals:
            rows.append({"pipeline": f"toy_{name}", "steps": args.steps,
                         "cfg": int(args.cfg), "computed_gflops": sub / 1e9,
                         "published_gflops": "", "status": ""})

    columns = ("pipeline", "steps", "cfg", "computed_gflops", "published_gflops", "status")
    print(",".join(columns))
    for row in rows:
        print(",".join(str(row[c]) for c in columns))
    if any(r["status"] == "FAIL" for r in rows):
        return 1
    return 0


def cmd_ablate(args):
    from .ablate import run_ablation

    run_cfg = load_run_config(args.config)
    out = run_ablation(run_cfg)
    print(f"wrote {out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="sle", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("train", help="train from a config file")
    q.add_argument("config")
    q.add_argument("--resume", default=None, help="checkpoint to continue from")
    q.set_defaults(func=cmd_train)

    q = sub.add_parser("sample", help="generate samples from a checkpoint")
    q.add_argument("checkpoint")
    q.add_argument("--steps", type=int, default=None)
    q.add_argument("--omega", type=float, default=None)
    q.add_argument("--gamma", type=float, default=None)
    q.add_argument("--sigma-max", type=float, default=None)
    q.add_argument("--label", type=int, required=True)
    q.add_argument("--n", type=int, default=16)
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--fresh-eps", action="store_true")
    q.add_argument("--weights", choices=("ema", "raw"), default="ema")
    q.add_argument("--out", default="samples.csv")
    q.set_defaults(func=cmd_sample)

    q = sub.add_parser("eval", help="append generation metrics to eval.csv")
    q.add_argument("checkpoint")
    q.add_argument("--steps", type=int, default=None)
    q.add_argument("--omega", type=float, default=None)
    q.add_argument("--gamma", type=float, default=None)
    q.add_argument("--n", type=int, default=None)
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--self-reference", action="store_true",
                   help="score the reference set against its own cached stats")
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_eval)

    q = sub.add_parser("cost", help="analytic FLOP tables")
    q.add_argument("--mode", choices=("paper", "toy"), required=True)
    q.add_argument("--steps", type=int, default=4)
    q.add_argument("--cfg", action="store_true", help="classifier-free guidance enabled")
    q.add_argument("--ckpt", default=None, help="checkpoint for toy mode")
    q.set_defaults(func=cmd_cost)

    q = sub.add_parser("ablate", help="run the ablation grid from a config file")
    q.add_argument("config")
    q.set_defaults(func=cmd_ablate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
