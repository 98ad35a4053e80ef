"""Compare the compiled kernel backend against the numpy fallback.

Times each hot kernel on training-shaped arrays, then a full training step
with each backend active. Run from the repo root:

    OPENBLAS_NUM_THREADS=1 python3 benchmarks/bench_backends.py
"""

import os
import time

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np

import sle.backend as backend
from sle.backend import numpy_kernels


def timeit(fn, repeats=300):
    fn()
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best * 1e6


def kernel_table(compiled):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((512, 256)).astype(np.float32)
    g = rng.standard_normal((512, 256)).astype(np.float32)
    p = x.copy()
    m, v = np.zeros_like(p), np.zeros_like(p)
    p2, m2, v2 = x.copy(), np.zeros_like(p), np.zeros_like(p)
    _, inv = compiled.rmsnorm_fwd(x, 1e-6)
    _, dot, na, nb = compiled.cosine_fwd(x, g)

    cases = [
        ("silu_fwd", lambda k: k.silu_fwd(x)),
        ("silu_bwd", lambda k: k.silu_bwd(x, g)),
        ("rmsnorm_fwd", lambda k: k.rmsnorm_fwd(x, 1e-6)),
        ("rmsnorm_bwd", lambda k: k.rmsnorm_bwd(x, inv, g)),
        ("l1_fwd", lambda k: k.l1_fwd(x, g)),
        ("l1_bwd", lambda k: k.l1_bwd(x, g, 1.0)),
        ("cosine_fwd", lambda k: k.cosine_fwd(x, g)),
        ("cosine_bwd", lambda k: k.cosine_bwd(x, g, dot, na, nb, 1.0)),
        ("adamw_step", lambda k: k.adamw_step(p, g, m, v, 1e-4, 0.9, 0.95,
                                              1e-8, 0.0, 0.1, 0.05)
         if k is compiled else k.adamw_step(p2, g, m2, v2, 1e-4, 0.9, 0.95,
                                            1e-8, 0.0, 0.1, 0.05)),
        ("ema_step", lambda k: k.ema_step(m, p, 0.9995)
         if k is compiled else k.ema_step(m2, p2, 0.9995)),
    ]
    print(f"{'kernel':<14}{'compiled us':>14}{'numpy us':>12}{'speedup':>10}")
    for name, fn in cases:
        tc = timeit(lambda: fn(compiled))
        tn = timeit(lambda: fn(numpy_kernels))
        print(f"{name:<14}{tc:>14.1f}{tn:>12.1f}{tn / tc:>9.2f}x")


def train_step_table():
    from sle.data import MixtureDatasetConfig, make_mixture, precompute_latents
    from sle.denoiser import DenoiserConfig
    from sle.tokenizer import LinearTokenizer, calibrate_scale
    from sle.trainer import TrainConfig, init_state, train_step

    ds = make_mixture(MixtureDatasetConfig(seed=42))
    raw = LinearTokenizer.create(32, 32, 7)
    tok = raw.with_scale(calibrate_scale(raw.encode_rows(ds.x)))
    z, labels = precompute_latents(ds, tok)
    model_cfg = DenoiserConfig(d_latent=32, n_classes=8, hidden=256, blocks=4)

    print(f"\n{'train_step (batch 256)':<26}{'ms/step':>10}")
    for name in ("compiled", "numpy"):
        prev = backend.use(name)
        try:
            cfg = TrainConfig(epochs=1, batch_size=256, seed=1)
            state = init_state(model_cfg, cfg)
            rng = np.random.default_rng(0)
            for _ in range(5):
                train_step(z[:256], labels[:256], state, cfg, rng)
            t0 = time.perf_counter()
            for _ in range(40):
                train_step(z[:256], labels[:256], state, cfg, rng)
            print(f"{name:<26}{(time.perf_counter() - t0) / 40 * 1e3:>10.2f}")
        finally:
            backend.use(prev)


def main():
    try:
        from sle.backend import _kernels as compiled
    except ImportError:
        print("compiled backend not built; run pip install -e . first")
        return 1
    print("kernel microbenchmarks, float32 (512, 256)\n")
    kernel_table(compiled)
    train_step_table()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
