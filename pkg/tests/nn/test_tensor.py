import numpy as np
import pytest

from src.errors import GraphStateError, ShapeError
from src.nn import tensor as T
from src.nn.tensor import Graph, Tensor


def param(values) -> Tensor:
    return Tensor(np.asarray(values, dtype=np.float64), requires_grad=True)


def test_product_rule():
    a = param([1.0, 2.0, 3.0])
    b = param([4.0, 5.0, 6.0])
    with Graph() as g:
        out = T.sum_(a * b + a)
    g.backward(out)
    np.testing.assert_allclose(a.grad, [5.0, 6.0, 7.0])
    np.testing.assert_allclose(b.grad, [1.0, 2.0, 3.0])


def test_broadcast_gradient_is_summed():
    x = param(np.ones((3, 4)))
    bias = param(np.zeros(4))
    with Graph() as g:
        out = T.sum_(x + bias)
    g.backward(out)
    np.testing.assert_allclose(bias.grad, np.full(4, 3.0))
    np.testing.assert_allclose(x.grad, np.ones((3, 4)))


def test_matmul_gradients():
    a = param(np.arange(6.0).reshape(2, 3))
    b = param(np.arange(12.0).reshape(3, 4))
    with Graph() as g:
        out = T.sum_(a @ b)
    g.backward(out)
    np.testing.assert_allclose(a.grad, np.ones((2, 4)) @ b.data.T)
    np.testing.assert_allclose(b.grad, a.data.T @ np.ones((2, 4)))


def test_reused_tensor_accumulates():
    x = param([2.0])
    with Graph() as g:
        out = T.sum_(x * x * x)
    g.backward(out)
    np.testing.assert_allclose(x.grad, [12.0])


def test_no_graph_means_no_tape():
    a = param([1.0])
    out = a * 2.0
    assert not out.requires_grad
    assert out._backward is None


def test_backward_runs_once():
    a = param([1.0])
    with Graph() as g:
        out = T.sum_(a * 3.0)
    g.backward(out)
    with pytest.raises(GraphStateError):
        g.backward(out)


def test_backward_needs_recorded_output():
    g = Graph()
    with pytest.raises(GraphStateError):
        g.backward(param([1.0]))


def test_backward_seed_shape_is_checked():
    a = param([1.0, 2.0])
    with Graph() as g:
        out = a * 2.0
    with pytest.raises(ShapeError):
        g.backward(out, np.ones(3))


def test_shape_errors():
    with pytest.raises(ShapeError):
        T.add(param(np.ones(3)), param(np.ones(4)))
    with pytest.raises(ShapeError):
        T.matmul(param(np.ones((2, 3))), param(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        T.reshape(param(np.ones(6)), (4, 2))
    with pytest.raises(ShapeError):
        Tensor(np.array(["a"]))


def test_softmax_rows_sum_to_one(rng):
    y = T.softmax(Tensor(rng.standard_normal((3, 5))))
    np.testing.assert_allclose(y.data.sum(axis=-1), np.ones(3))


def test_softmax_is_shift_invariant():
    x = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_allclose(T.softmax(Tensor(x)).data, T.softmax(Tensor(x + 1000.0)).data)


def test_dropout_modes(rng):
    x = param(np.ones((4, 4)))
    assert T.dropout(x, 0.5, None, training=False) is x
    with Graph():
        with pytest.raises(GraphStateError):
            T.dropout(x, 0.5, None, training=True)
    y = T.dropout(x, 0.5, rng, training=True)
    assert set(np.unique(y.data)) <= {0.0, 2.0}


def test_embedding_scatter_adds():
    table = param(np.zeros((3, 2)))
    with Graph() as g:
        out = T.sum_(T.embedding(table, [0, 2, 2]))
    g.backward(out)
    np.testing.assert_allclose(table.grad, [[1.0, 1.0], [0.0, 0.0], [2.0, 2.0]])
    with pytest.raises(ShapeError):
        T.embedding(table, [3])


def test_concat_splits_gradient():
    a = param(np.ones((2, 1)))
    b = param(np.ones((2, 3)))
    coeff = np.arange(8.0).reshape(2, 4)
    with Graph() as g:
        out = T.sum_(T.concat([a, b], axis=-1) * coeff)
    g.backward(out)
    np.testing.assert_allclose(a.grad, coeff[:, :1])
    np.testing.assert_allclose(b.grad, coeff[:, 1:])


def test_mean_scales_gradient():
    x = param(np.ones((2, 5)))
    with Graph() as g:
        out = T.mean(x)
    g.backward(out)
    np.testing.assert_allclose(x.grad, np.full((2, 5), 0.1))


def test_apply_loss_chains_numpy_gradient():
    x = param([1.0, -2.0])
    with Graph() as g:
        out = T.apply_loss(x * 3.0, lambda v: (float(np.sum(v**2)), 2.0 * v))
    g.backward(out)
    np.testing.assert_allclose(x.grad, [18.0, -36.0])


def test_apply_loss_checks_gradient_shape():
    with pytest.raises(ShapeError):
        T.apply_loss(param([1.0, 2.0]), lambda v: (0.0, np.zeros(3)))
