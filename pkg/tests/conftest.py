import os

# single-threaded BLAS: faster at these matrix sizes and keeps timings stable
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest

from sle import autodiff as ad


def fd_grad(f, x, h=1e-3):
    """Central-difference gradient of a scalar function of one float64 array.

    f receives the (mutated-in-place) array and must return a python float.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(analytic, numeric):
    """Norm-wise relative error, robust to exactly-zero gradients."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / denom)


def check_grad(build, leaves, rtol=1e-3, h=1e-3):
    """Compare backward() against central differences for every leaf.

    build() must rebuild the scalar graph from the leaves' current .data
    buffers (float64) and return the root Tensor.
    """
    root = build()
    grads = ad.gradients(root, leaves)
    for t, g in zip(leaves, grads):
        def f(_arr, _t=t):
            return float(build().data)

        num = fd_grad(f, t.data, h=h)
        err = rel_err(g, num)
        assert err < rtol, f"gradient mismatch: rel err {err:.3e} for leaf {t.shape}"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
