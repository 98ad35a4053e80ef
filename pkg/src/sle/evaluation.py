"""Desk-scale generation metrics.

toy-FID is the Fréchet distance between Gaussians fit directly in data space;
the matrix square root goes through an eigendecomposition of the symmetrized
product with eigenvalues clipped at zero. An unbiased RBF-kernel MMD^2 guards
against the Gaussianity assumption, and a nearest-class-mean oracle measures
conditional accuracy. All statistics are computed in float64.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .sampler import sample_batch

PSD_TOLERANCE = -1e-8


@dataclass
class GaussianSummary:
    mean: np.ndarray  # (d,)
    cov: np.ndarray   # (d, d), symmetric PSD

    @classmethod
    def fit(cls, samples):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] < 2:
            raise ShapeError(f"need a (n>=2, d) sample matrix, got {samples.shape}")
        cov = np.cov(samples, rowvar=False)
        return cls(mean=samples.mean(axis=0), cov=(cov + cov.T) / 2.0)


def _check_psd(cov, name):
    vals = np.linalg.eigvalsh(cov)
    if vals.min() < PSD_TOLERANCE:
        raise np.linalg.LinAlgError(
            f"{name} covariance has eigenvalue {vals.min():.3e} below {PSD_TOLERANCE}")


def _sqrtm_psd(mat):
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(a, b):
    """||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2})."""
    if a.mean.shape != b.mean.shape:
        raise ShapeError("summaries have different dimensions")
    _check_psd(a.cov, "first")
    _check_psd(b.cov, "second")
    diff = a.mean - b.mean
    root_a = _sqrtm_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    vals = np.clip(np.linalg.eigvalsh((inner + inner.T) / 2.0), 0.0, None)
    trace_sqrt = float(np.sum(np.sqrt(vals)))
    return float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * trace_sqrt)


def median_bandwidth(a, b, max_points=2000, seed=0):
    """Median pairwise distance over the pooled (subsampled) sets."""
    pooled = np.concatenate([np.asarray(a, np.float64), np.asarray(b, np.float64)])
    if pooled.shape[0] > max_points:
        idx = np.random.default_rng(seed).choice(pooled.shape[0], max_points, replace=False)
        pooled = pooled[idx]
    sq = np.sum(pooled**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pooled @ pooled.T)
    d2 = d2[np.triu_indices_from(d2, k=1)]
    return float(np.sqrt(np.median(np.clip(d2, 0.0, None))))


def _kernel_sums(x, y, gamma, block=1024):
    """Sum of exp(-gamma*||xi-yj||^2) over all pairs, blockwise."""
    sy = np.sum(y**2, axis=1)
    total = 0.0
    for start in range(0, x.shape[0], block):
        xb = x[start:start + block]
        d2 = np.sum(xb**2, axis=1)[:, None] + sy[None, :] - 2.0 * (xb @ y.T)
        total += float(np.sum(np.exp(-gamma * np.clip(d2, 0.0, None))))
    return total


def mmd_rbf(samples_a, samples_b, bandwidth):
    """Unbiased MMD^2 estimate with k(x,y) = exp(-||x-y||^2 / (2*bandwidth^2))."""
    a = np.asarray(samples_a, dtype=np.float64)
    b = np.asarray(samples_b, dtype=np.float64)
    m, n = a.shape[0], b.shape[0]
    if m < 2 or n < 2:
        raise ValueError("mmd_rbf: need at least 2 samples per set")
    if bandwidth <= 0:
        raise ValueError(f"mmd_rbf: bandwidth must be > 0, got {bandwidth}")
    gamma = 1.0 / (2.0 * bandwidth**2)
    kxx = (_kernel_sums(a, a, gamma) - m) / (m * (m - 1))   # minus the diagonal of ones
    kyy = (_kernel_sums(b, b, gamma) - n) / (n * (n - 1))
    kxy = _kernel_sums(a, b, gamma) / (m * n)
    return kxx + kyy - 2.0 * kxy


def balanced_labels(n_samples, n_classes):
    if n_samples % n_classes != 0:
        raise ValueError(f"n_samples {n_samples} not divisible by {n_classes} classes")
    return np.repeat(np.arange(n_classes, dtype=np.int64), n_samples // n_classes)


def class_accuracy(samples, labels, class_means):
    """Fraction of samples whose nearest class mean matches the conditioning label."""
    d2 = (np.sum(samples**2, axis=1)[:, None]
          - 2.0 * samples @ class_means.T
          + np.sum(class_means**2, axis=1)[None, :])
    return float(np.mean(np.argmin(d2, axis=1) == labels))


def evaluate(params, tok, cfg, dataset, n_samples, ref_stats=None, mmd_cap=5000):
    """Class-balanced generation metrics against a reference dataset.

    Returns a dict with toy_fid, mmd2, and class_acc. Reference Gaussian stats
    may be passed in (e.g. loaded from the on-disk cache); MMD compares seeded
    subsamples of at most mmd_cap points per side to bound runtime.
    """
    labels = balanced_labels(n_samples, dataset.config.n_classes)
    generated = sample_batch(labels, params, tok, cfg).astype(np.float64)
    ref = dataset.x.astype(np.float64)
    if ref_stats is None:
        ref_stats = GaussianSummary.fit(ref)
    fid = frechet_distance(GaussianSummary.fit(generated), ref_stats)

    rng = np.random.default_rng(cfg.seed)
    gen_s = generated if generated.shape[0] <= mmd_cap else \
        generated[rng.choice(generated.shape[0], mmd_cap, replace=False)]
    ref_s = ref if ref.shape[0] <= mmd_cap else \
        ref[rng.choice(ref.shape[0], mmd_cap, replace=False)]
    mmd2 = mmd_rbf(gen_s, ref_s, median_bandwidth(gen_s, ref_s))

    acc = class_accuracy(generated, labels, dataset.class_means.astype(np.float64))
    return {"toy_fid": fid, "mmd2": mmd2, "class_acc": acc}
