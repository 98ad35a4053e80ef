"""Fixed linear encoder/decoder pair between data space and latent space.

The encode matrix W has orthonormal rows (QR of a seeded Gaussian), so the
decode matrix is exactly W^T. A positive scale, calibrated so training latents
have unit pooled mean-square, is applied after encoding and undone before
decoding. The tokenizer is immutable and never touched by training.
"""

import numpy as np

from .errors import ShapeError


class LinearTokenizer:
    def __init__(self, w, scale=1.0):
        w = np.asarray(w, dtype=np.float32)
        if w.ndim != 2:
            raise ShapeError(f"tokenizer matrix must be 2-D, got {w.shape}")
        if scale <= 0:
            raise ValueError(f"tokenizer scale must be positive, got {scale}")
        self._w = w.copy()
        self._w.setflags(write=False)
        self.scale = float(scale)

    @classmethod
    def create(cls, d_data, d_latent, seed, scale=1.0):
        if d_latent > d_data:
            raise ShapeError(f"d_latent {d_latent} exceeds d_data {d_data}")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        g = rng.standard_normal((d_data, d_latent))
        q, r = np.linalg.qr(g)
        q = q * np.sign(np.diag(r))  # canonical sign, independent of LAPACK convention
        return cls(q.T, scale)

    @property
    def w(self):
        return self._w

    @property
    def d_latent(self):
        return self._w.shape[0]

    @property
    def d_data(self):
        return self._w.shape[1]

    def with_scale(self, scale):
        return LinearTokenizer(self._w, scale)

    def encode(self, x):
        x = np.asarray(x, dtype=np.float32)
        if x.shape != (self.d_data,):
            raise ShapeError(f"encode: expected ({self.d_data},), got {x.shape}")
        return np.float32(self.scale) * (self._w @ x)

    def decode(self, z):
        z = np.asarray(z, dtype=np.float32)
        if z.shape != (self.d_latent,):
            raise ShapeError(f"decode: expected ({self.d_latent},), got {z.shape}")
        return self._w.T @ (z / np.float32(self.scale))

    def encode_rows(self, x):
        if x.ndim != 2 or x.shape[1] != self.d_data:
            raise ShapeError(f"encode_rows: expected (n, {self.d_data}), got {x.shape}")
        return np.float32(self.scale) * (x @ self._w.T)

    def decode_rows(self, z):
        if z.ndim != 2 or z.shape[1] != self.d_latent:
            raise ShapeError(f"decode_rows: expected (n, {self.d_latent}), got {z.shape}")
        return (z / np.float32(self.scale)) @ self._w


def calibrate_scale(latents):
    """Scale that brings the pooled mean-square of raw encoded latents to 1."""
    latents = np.asarray(latents)
    if latents.size == 0:
        raise ValueError("calibrate_scale: empty latent sample")
    ms = float(np.mean(latents.astype(np.float64) ** 2))
    if ms <= 0:
        raise ValueError("calibrate_scale: latents are identically zero")
    return 1.0 / np.sqrt(ms)
