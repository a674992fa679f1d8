"""Primitive-level forward oracles and finite-difference backward checks."""

import numpy as np
import pytest

from ssagcn import autodiff as ad
from ssagcn.rng import Rng


def fd_check(f, tensors, step=1e-6, tol=1e-6):
    """Assert reverse-mode gradients match central differences."""
    err = ad.grad_check(f, tensors, step=step)
    assert err < tol, f"max relative gradient error {err}"


def test_matmul_identity():
    x = np.arange(12.0).reshape(3, 4)
    out = ad.matmul(ad.Tensor(np.eye(3)), ad.Tensor(x))
    assert np.array_equal(out.data, x)


def test_matmul_shape_error():
    with pytest.raises(ad.ShapeError):
        ad.matmul(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((4, 2))))


def test_matmul_vector_promotions():
    rng = Rng(0)
    m = rng.uniform(-1, 1, (3, 4))
    v = rng.uniform(-1, 1, 4)
    u = rng.uniform(-1, 1, 3)
    assert np.allclose(ad.matmul(ad.Tensor(m), ad.Tensor(v)).data, m @ v)
    assert np.allclose(ad.matmul(ad.Tensor(u), ad.Tensor(m)).data, u @ m)
    assert np.allclose(ad.matmul(ad.Tensor(v), ad.Tensor(v)).data, v @ v)


def test_softmax_constant_is_uniform():
    out = ad.softmax(ad.Tensor(np.full(7, 3.25)))
    assert np.allclose(out.data, np.full(7, 1.0 / 7))


def test_softmax_rows_sum_to_one():
    x = Rng(1).uniform(-5, 5, (4, 6))
    out = ad.softmax(ad.Tensor(x), axis=-1)
    assert np.allclose(out.data.sum(axis=-1), 1.0)


def conv2d_loop_oracle(x, w, b, padding):
    """Explicit 6-loop convolution oracle."""
    cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    oh = h + 2 * padding - kh + 1
    ow = wd + 2 * padding - kw + 1
    out = np.zeros((cout, oh, ow))
    for o in range(cout):
        for i in range(oh):
            for j in range(ow):
                acc = 0.0
                for c in range(cin):
                    for a in range(kh):
                        for bb in range(kw):
                            acc += xp[c, i + a, j + bb] * w[o, c, a, bb]
                out[o, i, j] = acc + (b[o] if b is not None else 0.0)
    return out


@pytest.mark.parametrize("padding", [0, 1])
def test_conv2d_matches_loop_oracle(padding):
    rng = Rng(2)
    x = rng.uniform(-1, 1, (12, 5, 4))
    w = rng.uniform(-1, 1, (6, 12, 3, 3))
    b = rng.uniform(-1, 1, 6)
    out = ad.conv2d(ad.Tensor(x), ad.Tensor(w), ad.Tensor(b), padding=padding)
    assert np.allclose(out.data, conv2d_loop_oracle(x, w, b, padding), atol=1e-12)


def test_conv2d_shape_errors():
    with pytest.raises(ad.ShapeError):
        ad.conv2d(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((1, 2, 3, 3))))
    with pytest.raises(ad.ShapeError):
        ad.conv2d(ad.Tensor(np.ones((2, 5, 5))), ad.Tensor(np.ones((1, 3, 3, 3))))


def test_backward_requires_scalar():
    t = ad.Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ad.NonScalarLoss):
        ad.mul(t, 2.0).backward()


def test_no_grad_fast_path_records_nothing():
    a = ad.Tensor(np.ones(4))
    out = ad.exp(ad.mul(a, 2.0))
    assert not out.requires_grad and out._parents == ()


def test_grad_accumulates_over_reuse():
    x = ad.Tensor(2.0, requires_grad=True)
    y = ad.add(ad.mul(x, x), x)  # x^2 + x
    y.backward()
    assert np.allclose(x.grad, 5.0)


def test_elementwise_backward():
    rng = Rng(3)
    a = ad.Tensor(rng.uniform(0.2, 2.0, (3, 4)), requires_grad=True)
    b = ad.Tensor(rng.uniform(0.2, 2.0, (3, 4)), requires_grad=True)

    def f(_):
        z = ad.div(ad.mul(a, b), ad.add(a, b))
        z = ad.add(ad.exp(ad.mul(z, 0.3)), ad.log(a))
        z = ad.add(z, ad.sqrt(b))
        z = ad.add(z, ad.tanh(a))
        return ad.tsum(z)

    fd_check(f, [a, b])


def test_broadcast_backward():
    a = ad.Tensor(Rng(4).uniform(-1, 1, (3, 4)), requires_grad=True)
    b = ad.Tensor(Rng(5).uniform(0.5, 1.5, (4,)), requires_grad=True)

    def f(_):
        return ad.tsum(ad.mul(ad.add(a, b), b))

    fd_check(f, [a, b])


def test_structural_ops_backward():
    a = ad.Tensor(Rng(6).uniform(-1, 1, (2, 3)), requires_grad=True)
    b = ad.Tensor(Rng(7).uniform(-1, 1, (2, 3)), requires_grad=True)

    def f(_):
        s = ad.stack([a, b], axis=0)
        c = ad.concat([a, b], axis=1)
        r = ad.reshape(c, (3, 4))
        t = ad.transpose(r)
        return ad.add(ad.tsum(ad.mul(s, s)), ad.tmean(t[1:3, :]))

    fd_check(f, [a, b])


def test_softmax_prelu_maximum_backward():
    a = ad.Tensor(Rng(8).uniform(-1, 1, (3, 5)) + 0.01, requires_grad=True)
    slope = ad.Tensor(np.full(5, 0.25), requires_grad=True)

    def f(_):
        z = ad.prelu(a, slope)
        z = ad.softmax(z, axis=-1)
        z = ad.maximum(z, 0.05)
        return ad.tsum(ad.mul(z, z))

    fd_check(f, [a, slope], tol=1e-5)


def test_matmul_backward():
    a = ad.Tensor(Rng(9).uniform(-1, 1, (3, 4)), requires_grad=True)
    b = ad.Tensor(Rng(10).uniform(-1, 1, (4, 2)), requires_grad=True)
    v = ad.Tensor(Rng(11).uniform(-1, 1, 2), requires_grad=True)

    def f(_):
        return ad.tsum(ad.matmul(ad.matmul(a, b), v))

    fd_check(f, [a, b, v])


def test_conv2d_backward():
    x = ad.Tensor(Rng(12).uniform(-1, 1, (4, 5, 3)), requires_grad=True)
    w = ad.Tensor(Rng(13).uniform(-1, 1, (2, 4, 3, 3)), requires_grad=True)
    b = ad.Tensor(Rng(14).uniform(-1, 1, 2), requires_grad=True)

    def f(_):
        out = ad.conv2d(x, w, b, padding=1)
        return ad.tsum(ad.mul(out, out))

    fd_check(f, [x, w, b], tol=1e-5)


def test_getitem_backward():
    x = ad.Tensor(Rng(15).uniform(-1, 1, (4, 3)), requires_grad=True)

    def f(_):
        return ad.tsum(ad.mul(x[1:3, :], x[0, :]))

    fd_check(f, [x])


def test_deep_chain_iterative_topo():
    # thousands of nodes must not hit the recursion limit
    x = ad.Tensor(0.5, requires_grad=True)
    y = x
    for _ in range(5000):
        y = ad.add(y, 1e-4)
    ad.tsum(y).backward()
    assert np.allclose(x.grad, 1.0)
