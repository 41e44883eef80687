import numpy as np
import pytest

import geomattn.tensor as T
from geomattn.tensor import Tape, Tensor
from oracles import central_difference, rel_error


def check_grad(fn, *arrays, seed=0, tol=1e-6):
    """Compare tape gradients of sum(fn(*x) * w) with central differences."""
    rng = np.random.default_rng(seed)
    out_shape = fn(*[Tensor(a) for a in arrays]).shape
    w = rng.normal(size=out_shape)

    def scalar(*xs):
        return float(np.sum(fn(*[Tensor(x) for x in xs]).data * w))

    xs = [Tensor(a.copy()) for a in arrays]
    with Tape() as tape:
        tape.watch(*xs)
        loss = T.tensor_sum(fn(*xs) * Tensor(w))
    grads = tape.gradient(loss, xs)
    for k, (a, g) in enumerate(zip(arrays, grads)):

        def partial(v, k=k):
            args = [x.copy() for x in arrays]
            args[k] = v
            return scalar(*args)

        expected = central_difference(partial, a)
        got = np.zeros_like(a) if g is None else g.data
        assert rel_error(got, expected) < tol, (k, got, expected)


@pytest.fixture
def x(rng):
    return rng.normal(size=(3, 4))


@pytest.fixture
def y(rng):
    return rng.normal(size=(3, 4))


def test_elementwise_binary(x, y):
    check_grad(lambda a, b: a + b, x, y)
    check_grad(lambda a, b: a - b, x, y)
    check_grad(lambda a, b: a * b, x, y)
    check_grad(lambda a, b: a / (b * b + 1.0), x, y)


def test_broadcasting(rng):
    a = rng.normal(size=(3, 1, 4))
    b = rng.normal(size=(5, 1))
    check_grad(lambda p, q: p * q + q, a, b)
    check_grad(lambda p, q: p / (q * q + 2.0), a, b)


def test_unary(x):
    check_grad(lambda a: -a, x)
    check_grad(lambda a: a ** 3, x)
    check_grad(lambda a: T.exp(a), x)
    check_grad(lambda a: T.log(a * a + 1.0), x)
    check_grad(lambda a: T.sigmoid(a), x)
    check_grad(lambda a: T.power(a * a + 1.0, -0.5), x)


def test_where(x, y):
    cond = x > 0
    check_grad(lambda a, b: T.where(cond, a, b), x, y)


def test_matmul(rng):
    a = rng.normal(size=(2, 3, 4))
    w = rng.normal(size=(4, 5))
    b = rng.normal(size=(2, 4, 2))
    check_grad(lambda p, q: p @ q, a, w)
    check_grad(lambda p, q: T.matmul(p, q), a, b)


def test_bilinear(rng):
    S = rng.normal(size=(3, 4, 2))
    a = rng.normal(size=(5, 3))
    b = rng.normal(size=(5, 4))
    check_grad(lambda p, q: T.bilinear(p, q, S), a, b)
    out = T.bilinear(Tensor(a), Tensor(b), S).data
    np.testing.assert_allclose(out, np.einsum("ni,nj,ijk->nk", a, b, S), atol=1e-12)


def test_safe_norm(rng):
    v = rng.normal(size=(4, 3))
    check_grad(lambda a: T.safe_norm(a), v)
    zero = Tensor(np.zeros((1, 3)))
    with Tape() as tape:
        tape.watch(zero)
        n = T.safe_norm(zero)
    (g,) = tape.gradient(n, [zero])
    assert np.all(g.data == 0.0)


def test_reductions_and_shapes(rng):
    a = rng.normal(size=(2, 3, 4))
    check_grad(lambda p: T.tensor_sum(p, axis=1), a)
    check_grad(lambda p: T.tensor_sum(p, axis=(0, 2), keepdims=True), a)
    check_grad(lambda p: T.mean(p, axis=-1), a)
    check_grad(lambda p: T.reshape(p, (6, 4)), a)
    check_grad(lambda p: T.transpose(p, (2, 0, 1)), a)
    check_grad(lambda p: T.expand_dims(p, 1), a)
    check_grad(lambda p: T.broadcast_to(T.expand_dims(p, 0), (5, 2, 3, 4)), a)
    check_grad(lambda p: T.sum_to(p, (1, 3, 1)), a)


def test_indexing_and_joining(rng):
    a = rng.normal(size=(4, 3))
    b = rng.normal(size=(4, 2))
    idx = np.array([0, 2, 2, 3, 1])
    check_grad(lambda p: p[idx], a)
    check_grad(lambda p: p[1:, ::2], a)
    check_grad(lambda p: T.scatter_add(p, idx, (6, 3)), rng.normal(size=(5, 3)))
    check_grad(lambda p, q: T.concatenate([p, q], axis=-1), a, b)
    check_grad(lambda p, q: T.stack([p, q * 2.0], axis=1), a, a.copy())


def test_scatter_add_accumulates_duplicates():
    out = T.scatter_add(Tensor(np.ones((3, 2))), np.array([0, 0, 1]), (2, 2))
    np.testing.assert_array_equal(out.data, [[2, 2], [1, 1]])


def test_second_derivative():
    # f = sum(x^3), df/dx = 3x^2, d/dx sum(w * 3x^2) = 6 w x
    x = Tensor(np.array([1.0, -2.0, 0.5]))
    w = np.array([0.3, 1.0, -2.0])
    with Tape() as outer:
        outer.watch(x)
        with Tape() as inner:
            inner.watch(x)
            f = T.tensor_sum(x ** 3)
        (dx,) = inner.gradient(f, [x])
        loss = T.tensor_sum(dx * Tensor(w))
    (ddx,) = outer.gradient(loss, [x])
    np.testing.assert_allclose(dx.data, 3 * x.data ** 2)
    np.testing.assert_allclose(ddx.data, 6 * w * x.data)


def test_double_backward_through_parameter(rng):
    """Parameter gradient of a loss built from input gradients."""
    W0 = rng.normal(size=(3, 4))
    X = rng.normal(size=(5, 3))

    def loss_of(Wdata):
        W = Tensor(Wdata, requires_grad=True)
        xs = Tensor(X)
        with Tape() as outer:
            with Tape() as inner:
                inner.watch(xs)
                e = T.tensor_sum(T.sigmoid(xs @ W) ** 2)
            (gx,) = inner.gradient(e, [xs])
            loss = T.tensor_sum(gx * gx)
        return loss, outer, W

    loss, outer, W = loss_of(W0)
    grads = outer.backward(loss)
    fd = central_difference(lambda w: loss_of(w)[0].item(), W0)
    assert rel_error(grads[W].data, fd) < 1e-6


def test_tape_consumed_after_one_backward():
    x = Tensor(np.ones(2))
    with Tape() as tape:
        tape.watch(x)
        y = T.tensor_sum(x * x)
    tape.gradient(y, [x])
    with pytest.raises(RuntimeError):
        tape.gradient(y, [x])


def test_persistent_tape_allows_reuse():
    x = Tensor(np.array([2.0]))
    with Tape(persistent=True) as tape:
        tape.watch(x)
        y = x * x
        z = y * x
    assert tape.gradient(y, [x])[0].item() == 4.0
    assert tape.gradient(z, [x])[0].item() == 12.0


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2.0
    with pytest.raises(ValueError):
        tape.backward(y)


def test_unrelated_source_gets_none():
    x = Tensor(np.ones(2))
    z = Tensor(np.ones(2))
    with Tape() as tape:
        tape.watch(x, z)
        y = T.tensor_sum(x)
    gx, gz = tape.gradient(y, [x, z])
    np.testing.assert_array_equal(gx.data, [1, 1])
    assert gz is None


@pytest.mark.filterwarnings("ignore:divide by zero")
def test_non_finite_forward_raises():
    with pytest.raises(FloatingPointError):
        T.log(Tensor(np.array([0.0, 1.0])))
    T.check_finite(False)
    try:
        out = T.log(Tensor(np.array([0.0])))
        assert np.isneginf(out.data[0])
    finally:
        T.check_finite(True)


def test_untracked_ops_are_not_recorded():
    a = Tensor(np.ones(3))
    with Tape() as tape:
        _ = a * 3.0
    assert len(tape) == 0
