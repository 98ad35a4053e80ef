import numpy as np
import pytest

from conftest import check_grad, fd_grad, rel_err
from sle import autodiff as ad
from sle.errors import DegenerateInputError, ShapeError


def leaf64(rng, *shape):
    return ad.leaf(rng.uniform(-2.0, 2.0, size=shape), dtype=np.float64)


def test_rms_normalize_frozen_values():
    out = ad.rms_normalize(ad.leaf(np.array([3.0, 4.0]), dtype=np.float64), eps=0.0)
    np.testing.assert_allclose(out.data, [0.848528, 1.131371], atol=1e-6)
    assert abs(np.mean(out.data**2) - 1.0) < 1e-12


def test_rms_normalize_identity_and_scale_invariance(rng):
    x = rng.standard_normal(16)
    x = x / np.sqrt(np.mean(x**2))
    out = ad.rms_normalize(ad.leaf(x, dtype=np.float64), eps=0.0)
    np.testing.assert_allclose(out.data, x, atol=1e-12)
    a = ad.rms_normalize(ad.leaf(x, dtype=np.float64), eps=0.0).data
    b = ad.rms_normalize(ad.leaf(7.0 * x, dtype=np.float64), eps=0.0).data
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_rms_normalize_errors():
    with pytest.raises(ShapeError):
        ad.rms_normalize(ad.leaf(np.zeros((0,))))
    with pytest.raises(DegenerateInputError):
        ad.rms_normalize(ad.leaf(np.zeros(4)), eps=0.0)


def test_rms_normalize_mean_square_band(rng):
    x = rng.uniform(-2, 2, size=(500, 16)).astype(np.float32)
    ms_in = np.mean(x.astype(np.float64) ** 2, axis=1)
    keep = ms_in >= 1e-2
    out = ad.rms_normalize(ad.leaf(x[keep]), eps=1e-6)
    ms = np.mean(out.data.astype(np.float64) ** 2, axis=1)
    assert np.all(ms >= 1.0 - 1e-4) and np.all(ms <= 1.0)


def test_sum_gradient_is_ones(rng):
    x = leaf64(rng, 3, 5)
    ad.backward(ad.sum_all(x))
    np.testing.assert_array_equal(x.grad, np.ones((3, 5)))


def test_l1_subgradient_formula(rng):
    x = leaf64(rng, 40)
    t = leaf64(rng, 40)
    # keep away from kinks so the formula and finite differences agree
    mask = np.abs(x.data - t.data) < 0.1
    x.data[mask] += 0.3
    node = ad.l1_loss(x, t)
    ad.backward(node)
    expected = np.sign(x.data - t.data) / x.data.size
    np.testing.assert_allclose(x.grad, expected, atol=1e-12)
    num = fd_grad(lambda _: float(ad.l1_loss(x, t).data), x.data)
    assert rel_err(x.grad, num) < 1e-3


def test_stop_gradient_blocks_everything(rng):
    w = leaf64(rng, 4, 4)
    x = leaf64(rng, 2, 4)
    hidden = ad.matmul(x, w)
    root = ad.sum_all(ad.silu(ad.stop_gradient(hidden)))
    grads = ad.gradients(root, [w, x])
    assert np.all(grads[0] == 0.0)
    assert np.all(grads[1] == 0.0)


def test_backward_requires_scalar_root(rng):
    x = leaf64(rng, 3)
    with pytest.raises(ShapeError):
        ad.backward(ad.silu(x))


@pytest.mark.parametrize("op_name", [
    "matmul", "silu", "rms_normalize", "l1", "cosine", "bias_add",
    "embedding", "mul_const", "concat_slice", "mean_all",
])
def test_gradcheck_each_op(op_name, rng):
    for _ in range(10):
        if op_name == "matmul":
            a, b = leaf64(rng, 3, 4), leaf64(rng, 4, 5)
            w = rng.uniform(-1, 1, size=(3, 5))
            check_grad(lambda: ad.sum_all(ad.mul_const(ad.matmul(a, b), w)), [a, b])
        elif op_name == "silu":
            x = leaf64(rng, 4, 6)
            w = rng.uniform(-1, 1, size=(4, 6))
            check_grad(lambda: ad.sum_all(ad.mul_const(ad.silu(x), w)), [x])
        elif op_name == "rms_normalize":
            x = leaf64(rng, 3, 8)
            w = rng.uniform(-1, 1, size=(3, 8))
            check_grad(lambda: ad.sum_all(ad.mul_const(ad.rms_normalize(x), w)), [x])
        elif op_name == "l1":
            a, b = leaf64(rng, 30), leaf64(rng, 30)
            mask = np.abs(a.data - b.data) < 0.1
            a.data[mask] += 0.3
            check_grad(lambda: ad.l1_loss(a, b), [a, b])
        elif op_name == "cosine":
            a, b = leaf64(rng, 4, 6), leaf64(rng, 4, 6)
            check_grad(lambda: ad.cosine_loss(a, b), [a, b])
        elif op_name == "bias_add":
            x, b = leaf64(rng, 5, 3), leaf64(rng, 3)
            w = rng.uniform(-1, 1, size=(5, 3))
            check_grad(lambda: ad.sum_all(ad.mul_const(ad.add(x, b), w)), [x, b])
        elif op_name == "embedding":
            table = leaf64(rng, 6, 4)
            idx = rng.integers(0, 6, size=8)
            w = rng.uniform(-1, 1, size=(8, 4))
            check_grad(lambda: ad.sum_all(ad.mul_const(ad.embedding(table, idx), w)),
                       [table])
        elif op_name == "mul_const":
            x = leaf64(rng, 7)
            c = rng.uniform(-2, 2, size=7)
            check_grad(lambda: ad.sum_all(ad.mul_const(x, c)), [x])
        elif op_name == "concat_slice":
            a, b = leaf64(rng, 3, 4), leaf64(rng, 2, 4)
            w = rng.uniform(-1, 1, size=(2, 4))
            check_grad(
                lambda: ad.sum_all(ad.mul_const(
                    ad.slice_rows(ad.concat_rows(a, b), 2, 4), w)), [a, b])
        elif op_name == "mean_all":
            x = leaf64(rng, 4, 4)
            check_grad(lambda: ad.mean_all(ad.silu(x)), [x])


def test_gradient_accumulates_on_reuse(rng):
    x = leaf64(rng, 5)
    root = ad.add(ad.sum_all(ad.mul_const(x, 2.0)), ad.sum_all(ad.mul_const(x, 3.0)))
    ad.backward(root)
    np.testing.assert_allclose(x.grad, np.full(5, 5.0), atol=1e-12)


def test_determinism_bitwise(rng):
    x = rng.standard_normal((16, 16)).astype(np.float32)
    w = rng.standard_normal((16, 16)).astype(np.float32)

    def run():
        xt, wt = ad.leaf(x), ad.leaf(w)
        root = ad.cosine_loss(ad.silu(ad.matmul(xt, wt)), xt)
        ad.backward(root)
        return root.data.copy(), wt.grad.copy()

    v1, g1 = run()
    v2, g2 = run()
    assert v1 == v2
    np.testing.assert_array_equal(g1, g2)


def test_shape_errors():
    a = ad.leaf(np.zeros((2, 3)))
    b = ad.leaf(np.zeros((2, 3)))
    with pytest.raises(ShapeError):
        ad.matmul(a, b)
    with pytest.raises(ShapeError):
        ad.add(a, ad.leaf(np.zeros(2)))
    with pytest.raises(ShapeError):
        ad.l1_loss(a, ad.leaf(np.zeros((3, 2))))


def test_cosine_degenerate_input():
    with pytest.raises(DegenerateInputError):
        ad.cosine_loss(ad.leaf(np.zeros(4)), ad.leaf(np.ones(4)))
