import numpy as np
import pytest

from sle.data import MixtureDatasetConfig, make_mixture, precompute_latents
from sle.errors import ConfigError, ShapeError
from sle.tokenizer import LinearTokenizer, calibrate_scale


def default_cfg(**kw):
    base = dict(n_classes=8, d_data=32, n_per_class=200, spread=0.5,
                mean_radius=4.0, seed=42)
    base.update(kw)
    return MixtureDatasetConfig(**base)


def test_same_seed_bit_identical():
    a = make_mixture(default_cfg())
    b = make_mixture(default_cfg())
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.class_means, b.class_means)


def test_tiny_spread_collapses_to_means():
    ds = make_mixture(default_cfg(spread=1e-6, n_per_class=10))
    for k in range(8):
        assert np.abs(ds.x[ds.labels == k] - ds.class_means[k]).max() < 1e-4


def test_means_sit_on_radius_sphere():
    ds = make_mixture(default_cfg())
    np.testing.assert_allclose(np.linalg.norm(ds.class_means, axis=1), 4.0, rtol=1e-5)


def test_nearest_mean_classifier_is_nearly_perfect():
    ds = make_mixture(default_cfg(n_per_class=500))
    d2 = ((ds.x[:, None, :] - ds.class_means[None, :, :]) ** 2).sum(axis=2)
    acc = np.mean(np.argmin(d2, axis=1) == ds.labels)
    assert acc > 0.99


def test_class_separation_against_spread():
    ds = make_mixture(default_cfg())
    k = ds.class_means.shape[0]
    dists = [np.linalg.norm(ds.class_means[i] - ds.class_means[j])
             for i in range(k) for j in range(i + 1, k)]
    assert min(dists) > 6 * ds.config.spread


def test_config_validation():
    with pytest.raises(ConfigError):
        make_mixture(default_cfg(n_classes=1))
    with pytest.raises(ConfigError):
        make_mixture(default_cfg(spread=0.0))
    with pytest.raises(ConfigError):
        make_mixture(default_cfg(d_data=1))


def test_precompute_latents_identity_tokenizer():
    ds = make_mixture(default_cfg(d_data=8, n_per_class=20))
    tok = LinearTokenizer(np.eye(8, dtype=np.float32), scale=1.0)
    z, labels = precompute_latents(ds, tok)
    np.testing.assert_array_equal(z, ds.x)
    np.testing.assert_array_equal(labels, ds.labels)


def test_precompute_latents_recompute_is_byte_identical():
    ds = make_mixture(default_cfg())
    raw = LinearTokenizer.create(32, 16, seed=7)
    tok = raw.with_scale(calibrate_scale(raw.encode_rows(ds.x)))
    z1, _ = precompute_latents(ds, tok)
    z2, _ = precompute_latents(ds, tok)
    assert z1.tobytes() == z2.tobytes()


def test_precompute_latents_calibrated_pooled_mean_square():
    ds = make_mixture(default_cfg(n_per_class=1000))
    raw = LinearTokenizer.create(32, 16, seed=7)
    tok = raw.with_scale(calibrate_scale(raw.encode_rows(ds.x)))
    z, _ = precompute_latents(ds, tok)
    assert 0.95 <= float(np.mean(z.astype(np.float64) ** 2)) <= 1.05


def test_latent_separation_preserved_under_orthonormal_tokenizer():
    ds = make_mixture(default_cfg())

    def min_latent_dist(d_latent):
        raw = LinearTokenizer.create(32, d_latent, seed=7)
        scale = calibrate_scale(raw.encode_rows(ds.x))
        latent_means = raw.with_scale(scale).encode_rows(ds.class_means)
        k = latent_means.shape[0]
        return scale, min(np.linalg.norm(latent_means[i] - latent_means[j])
                          for i in range(k) for j in range(i + 1, k))

    # exact mode is an isometry up to the calibration scale
    scale, dist = min_latent_dist(32)
    assert dist > 6 * ds.config.spread * scale
    # a projecting tokenizer keeps most of the separation for this seed
    scale, dist = min_latent_dist(16)
    assert dist > 4 * ds.config.spread * scale


def test_precompute_dimension_mismatch():
    ds = make_mixture(default_cfg())
    tok = LinearTokenizer.create(16, 8, seed=0)
    with pytest.raises(ShapeError):
        precompute_latents(ds, tok)


def test_latent_cache_roundtrip_through_checkpoint_format(tmp_path):
    from sle import checkpoint

    ds = make_mixture(default_cfg(n_per_class=50))
    raw = LinearTokenizer.create(32, 16, seed=7)
    tok = raw.with_scale(calibrate_scale(raw.encode_rows(ds.x)))
    z, labels = precompute_latents(ds, tok)
    path = tmp_path / "latents.ckpt"
    checkpoint.save(str(path), {"z": z, "labels": labels.astype(np.float32)})
    arrays, _, _ = checkpoint.load(str(path))
    assert arrays["z"].tobytes() == z.tobytes()
    np.testing.assert_array_equal(arrays["labels"].astype(np.int64), labels)
