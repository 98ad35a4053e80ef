"""Pure-numpy implementations of the hot elementwise kernels.

Matrix products go through BLAS in every backend; this module only covers the
fused elementwise/reduction kernels that the compiled backend accelerates.
All functions accept float32 or float64 arrays and preserve the input dtype.
Row-wise kernels treat a 1-D array as a single row; `inv`, `dot`, `na`, `nb`
are per-row auxiliaries handed back to the matching backward kernel.
"""

import numpy as np

NAME = "numpy"


def silu_fwd(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s


def silu_bwd(x, gy):
    s = 1.0 / (1.0 + np.exp(-x))
    return gy * (s * (1.0 + x * (1.0 - s)))


def rmsnorm_fwd(x, eps):
    """Row-wise y = x / sqrt(mean(x^2) + eps). Returns (y, inv) with inv shaped (rows, 1)."""
    x2 = x if x.ndim == 2 else x.reshape(1, -1)
    ms = np.mean(x2 * x2, axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(ms + np.asarray(eps, dtype=x.dtype))
    return (x2 * inv).reshape(x.shape), inv


def rmsnorm_bwd(x, inv, gy):
    x2 = x if x.ndim == 2 else x.reshape(1, -1)
    gy2 = gy if gy.ndim == 2 else gy.reshape(1, -1)
    d = x2.shape[1]
    dot = np.sum(gy2 * x2, axis=-1, keepdims=True)
    return (inv * gy2 - (inv**3) * (dot / d) * x2).reshape(x.shape)


def l1_fwd(a, b):
    return float(np.mean(np.abs(a - b)))


def l1_bwd(a, b, g):
    return np.sign(a - b) * np.asarray(g / a.size, dtype=a.dtype)


def cosine_fwd(a, b):
    """Mean over rows of 1 - cos(a_r, b_r). Returns (loss, dot, na, nb) per row."""
    a2 = (a if a.ndim == 2 else a.reshape(1, -1)).astype(np.float64, copy=False)
    b2 = (b if b.ndim == 2 else b.reshape(1, -1)).astype(np.float64, copy=False)
    dot = np.sum(a2 * b2, axis=-1)
    na = np.sqrt(np.sum(a2 * a2, axis=-1))
    nb = np.sqrt(np.sum(b2 * b2, axis=-1))
    loss = float(np.mean(1.0 - dot / (na * nb)))
    return loss, dot, na, nb


def cosine_bwd(a, b, dot, na, nb, g):
    a2 = (a if a.ndim == 2 else a.reshape(1, -1)).astype(np.float64, copy=False)
    b2 = (b if b.ndim == 2 else b.reshape(1, -1)).astype(np.float64, copy=False)
    c = -float(g) / a2.shape[0]
    inv_ab = (1.0 / (na * nb))[:, None]
    ga = c * (b2 * inv_ab - a2 * (dot / (na**3 * nb))[:, None])
    gb = c * (a2 * inv_ab - b2 * (dot / (na * nb**3))[:, None])
    return ga.astype(a.dtype).reshape(a.shape), gb.astype(b.dtype).reshape(b.shape)


def adamw_step(p, g, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
    """In-place decoupled-weight-decay Adam update with precomputed bias corrections."""
    dt = p.dtype.type
    m *= dt(beta1)
    m += dt(1.0 - beta1) * g
    v *= dt(beta2)
    v += dt(1.0 - beta2) * (g * g)
    mhat = m / dt(bc1)
    vhat = v / dt(bc2)
    p -= dt(lr) * (mhat / (np.sqrt(vhat) + dt(eps)) + dt(weight_decay) * p)


def ema_step(shadow, p, decay):
    dt = shadow.dtype.type
    shadow *= dt(decay)
    shadow += dt(1.0 - decay) * p
