"""Autodiff engine: op-level gradients against finite differences and the
graph-level properties (accumulation, broadcasting, cycle detection)."""

import numpy as np
import pytest

from beatlab.errors import GraphError, ShapeError
from beatlab.nn import Tensor, concat, no_grad, pad, stack


def fd_grad(f, x, h=1e-6):
    """Central-difference gradient of scalar f at array x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        g.reshape(-1)[i] = (fp - fm) / (2 * h)
    return g


def check_unary(op, x_data, h=1e-6, tol=1e-6):
    x = Tensor(x_data.copy(), requires_grad=True)
    out = op(x)
    out.backward()
    numeric = fd_grad(lambda a: float(op(Tensor(a)).data.sum()), x_data.copy(), h)
    np.testing.assert_allclose(x.grad, numeric, rtol=tol, atol=tol)


rng = np.random.default_rng(42)


@pytest.mark.parametrize("op", [
    lambda t: t.exp(),
    lambda t: (t * t + 1.0).log(),
    lambda t: (t * t + 0.5).sqrt(),
    lambda t: t.tanh(),
    lambda t: t.sigmoid(),
    lambda t: (t + 0.01).relu(),
    lambda t: t ** 3,
    lambda t: t.softmax(axis=-1),
    lambda t: t.log_softmax(axis=-1),
    lambda t: t.sum(axis=0),
    lambda t: t.mean(axis=1, keepdims=True),
    lambda t: t.reshape(6, 2),
    lambda t: t.transpose((1, 0)),
    lambda t: t[1:, ::2],
    lambda t: pad(t, ((1, 2), (0, 1))),
])
def test_unary_gradients(op):
    check_unary(op, rng.normal(size=(3, 4)))


def test_binary_gradients_with_broadcast():
    a_data = rng.normal(size=(3, 4))
    b_data = rng.normal(size=(4,)) + 2.0
    for op in [lambda a, b: a + b, lambda a, b: a * b,
               lambda a, b: a - b, lambda a, b: a / b]:
        a = Tensor(a_data.copy(), requires_grad=True)
        b = Tensor(b_data.copy(), requires_grad=True)
        op(a, b).backward()
        na = fd_grad(lambda x: float(op(Tensor(x), Tensor(b_data)).data.sum()),
                     a_data.copy())
        nb = fd_grad(lambda x: float(op(Tensor(a_data), Tensor(x)).data.sum()),
                     b_data.copy())
        np.testing.assert_allclose(a.grad, na, atol=1e-6)
        np.testing.assert_allclose(b.grad, nb, atol=1e-6)


def test_matmul_gradient_batched():
    a_data = rng.normal(size=(2, 3, 4))
    b_data = rng.normal(size=(4, 5))
    a = Tensor(a_data.copy(), requires_grad=True)
    b = Tensor(b_data.copy(), requires_grad=True)
    (a @ b).backward()
    na = fd_grad(lambda x: float((Tensor(x) @ Tensor(b_data)).data.sum()),
                 a_data.copy())
    nb = fd_grad(lambda x: float((Tensor(a_data) @ Tensor(x)).data.sum()),
                 b_data.copy())
    np.testing.assert_allclose(a.grad, na, atol=1e-5)
    np.testing.assert_allclose(b.grad, nb, atol=1e-5)


def test_matmul_shape_errors():
    with pytest.raises(ShapeError):
        Tensor(np.ones(3)) @ Tensor(np.ones((3, 2)))
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((4, 2)))


def test_fancy_index_gradient_accumulates_duplicates():
    x = Tensor(np.arange(4.0), requires_grad=True)
    idx = np.array([0, 0, 2])
    x[idx].backward()
    np.testing.assert_array_equal(x.grad, [2.0, 0.0, 1.0, 0.0])


def test_concat_and_stack_gradients():
    a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
    concat([a, b], axis=1).sum().backward()
    np.testing.assert_array_equal(a.grad, np.ones((2, 3)))
    np.testing.assert_array_equal(b.grad, np.ones((2, 2)))

    c = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    (stack([c, c * 2.0], axis=0) * 1.0).sum().backward()
    np.testing.assert_array_equal(c.grad, 3.0 * np.ones((2, 3)))


def test_grad_of_sum_is_ones_and_norm_is_x():
    x_data = rng.normal(size=(5,))
    x = Tensor(x_data.copy(), requires_grad=True)
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, np.ones(5))

    y = Tensor(x_data.copy(), requires_grad=True)
    ((y * y).sum() * 0.5).backward()
    np.testing.assert_allclose(y.grad, x_data, rtol=1e-12)


def test_shared_subexpression_accumulates():
    x = Tensor(np.array([2.0]), requires_grad=True)
    ((x * x) + x).backward()  # d/dx (x^2 + x) = 2x + 1
    np.testing.assert_allclose(x.grad, [5.0])


def test_softmax_properties():
    x = rng.normal(size=(4, 6))
    s = Tensor(x).softmax(axis=-1).data
    np.testing.assert_allclose(s.sum(axis=-1), np.ones(4), atol=1e-12)
    shifted = Tensor(x + 3.7).softmax(axis=-1).data
    np.testing.assert_allclose(s, shifted, atol=1e-12)


def test_no_grad_suppresses_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = x * 2.0
    assert y._parents == () and not y.requires_grad


def test_cycle_detection():
    x = Tensor(np.ones(2), requires_grad=True)
    y = x * 2.0
    y._parents = (y,)  # deliberately corrupt the graph
    with pytest.raises(GraphError):
        y.backward()


def test_backward_accumulates_over_calls():
    x = Tensor(np.ones(3), requires_grad=True)
    x.sum().backward()
    x.sum().backward()
    np.testing.assert_array_equal(x.grad, 2 * np.ones(3))
