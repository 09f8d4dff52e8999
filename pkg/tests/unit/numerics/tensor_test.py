import numpy as np
import pytest

from logomr.common import ContractError, NumericError, ShapeError, UninformativeSampleError
from logomr.numerics import Graph, masked_bce_value


def _naive_conv2d(x, w, b):
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((n, cout, h, wd))
    for i in range(n):
        for o in range(cout):
            for r in range(h):
                for c in range(wd):
                    out[i, o, r, c] = np.sum(xp[i, :, r:r + k, c:c + k] * w[o]) + b[o]
    return out


def test_matmul_dims():
    g = Graph()
    out = g.matmul(g.constant(np.ones((2, 3))), g.constant(np.ones((3, 4))))

    assert out.dims == [2, 4]
    assert np.all(out.data == 3.0)


def test_matmul_mismatch_names_op_and_dims():
    g = Graph()
    with pytest.raises(ShapeError, match=r"matmul.*\[2, 3\].*\[4, 4\]"):
        g.matmul(g.constant(np.ones((2, 3))), g.constant(np.ones((4, 4))))


def test_add_incompatible_broadcast():
    g = Graph()
    with pytest.raises(ShapeError, match="add"):
        g.add(g.constant(np.ones((2, 3))), g.constant(np.ones((2, 4))))


def test_softmax_symmetric():
    g = Graph()
    out = g.softmax(g.constant(np.zeros((1, 2))))

    assert out.data.tolist() == [[0.5, 0.5]]


@pytest.mark.parametrize("axis", [0, 1, -1])
def test_softmax_rows_sum_to_one(axis):
    rng = np.random.default_rng(3)
    g = Graph()
    out = g.softmax(g.constant(rng.normal(0, 5, size=(7, 9))), axis=axis)

    assert np.all(np.abs(out.data.sum(axis=axis) - 1.0) <= 1e-12)


def test_layer_norm_constant_vector_is_zero():
    g = Graph()
    out = g.layer_norm(g.constant(np.full((1, 6), 4.2)), g.constant(np.ones(6)), g.constant(np.zeros(6)))

    assert np.all(out.data == 0.0)


def test_layer_norm_moments():
    rng = np.random.default_rng(11)
    g = Graph()
    # eps sits inside the square root, so the variance target needs a large input variance
    x = rng.normal(3.0, 1e3, size=(5, 32))
    out = g.layer_norm(g.constant(x), g.constant(np.ones(32)), g.constant(np.zeros(32)))

    assert np.all(np.abs(out.data.mean(axis=-1)) <= 1e-10)
    assert np.all(np.abs(out.data.var(axis=-1) - 1.0) <= 1e-8)


def test_layer_norm_gamma_mismatch():
    g = Graph()
    with pytest.raises(ShapeError, match="layer_norm"):
        g.layer_norm(g.constant(np.ones((2, 4))), g.constant(np.ones(3)), g.constant(np.zeros(3)))


def test_non_finite_input_is_numeric_error():
    g = Graph()
    with pytest.raises(NumericError):
        g.constant(np.array([1.0, np.nan]))


def test_overflowing_output_is_numeric_error():
    g = Graph()
    x = g.constant(np.array([1e200]))
    with pytest.raises(NumericError, match="mul"):
        g.mul(x, x)


def test_unknown_op_kind():
    g = Graph()
    with pytest.raises(ContractError, match="unknown op kind"):
        g.forward_op("cosine", g.constant(np.ones(2)))


def test_square_gradient():
    g = Graph()
    x = g.parameter("x", np.array([3.0]))
    loss = g.mul(x, x)

    assert g.backward(loss)["x"].tolist() == [6.0]


def test_disconnected_parameter_gets_exact_zero():
    g = Graph()
    x = g.parameter("x", np.array([2.0]))
    w = g.parameter("w", np.ones((3, 3)))
    loss = g.scale(x, 5.0)

    grads = g.backward(loss)

    assert grads["x"].tolist() == [5.0]
    assert grads["w"].shape == (3, 3)
    assert np.all(grads["w"] == 0.0)


def test_backward_needs_scalar():
    g = Graph()
    x = g.parameter("x", np.ones(3))
    with pytest.raises(ContractError, match="scalar"):
        g.backward(g.relu(x))


def test_parameter_reused_accumulates():
    g = Graph()
    x = g.parameter("x", np.array([[2.0]]))
    loss = g.add(g.matmul(x, x), g.scale(x, 3.0))

    assert g.backward(loss)["x"].tolist() == [[7.0]]


def test_backward_is_deterministic():
    rng = np.random.default_rng(5)
    w = rng.normal(size=(4, 3))
    x = rng.normal(size=(6, 4))

    def run():
        g = Graph()
        wt = g.parameter("w", w)
        out = g.mean(g.gelu(g.matmul(g.constant(x), wt)))
        return out.data.copy(), g.backward(out)["w"]

    first, second = run(), run()
    assert np.array_equal(first[0], second[0])
    assert np.array_equal(first[1], second[1])


def test_conv2d_matches_naive_loops():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, 16, 16))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    g = Graph()

    out = g.conv2d(g.constant(x), g.constant(w), g.constant(b))

    assert np.max(np.abs(out.data - _naive_conv2d(x, w, b))) <= 1e-10


def test_max_pool_crops_odd_extent():
    g = Graph()
    x = np.arange(25, dtype=float).reshape(1, 1, 5, 5)

    out = g.max_pool2d(g.constant(x))

    assert out.data[0, 0].tolist() == [[6.0, 8.0], [16.0, 18.0]]


def test_transpose_and_reshape_backward():
    g = Graph()
    x = g.parameter("x", np.arange(6, dtype=float).reshape(2, 3))
    y = g.reshape(g.transpose(x, (1, 0)), (6,))
    loss = g.sum(g.mul(y, g.constant(np.arange(6, dtype=float))))

    grad = g.backward(loss)["x"]

    assert grad.tolist() == [[0.0, 2.0, 4.0], [1.0, 3.0, 5.0]]


def test_reshape_bad_dims():
    g = Graph()
    with pytest.raises(ShapeError, match="reshape"):
        g.reshape(g.constant(np.ones((2, 3))), (4,))


def test_concat_backward_splits():
    g = Graph()
    a = g.parameter("a", np.ones((1, 2)))
    b = g.parameter("b", np.ones((2, 2)))
    loss = g.sum(g.mul(g.concat([a, b], axis=0), g.constant(np.arange(6, dtype=float).reshape(3, 2))))

    grads = g.backward(loss)

    assert grads["a"].tolist() == [[0.0, 1.0]]
    assert grads["b"].tolist() == [[2.0, 3.0], [4.0, 5.0]]


def test_masked_bce_uniform():
    loss = masked_bce_value(np.full(3, 0.5), np.array([1.0, 0.0, 0.0]), np.ones(3))

    assert loss == pytest.approx(np.log(2.0), abs=1e-12)


def test_masked_bce_empty_mask():
    g = Graph()
    with pytest.raises(UninformativeSampleError):
        g.masked_bce(g.constant(np.full(2, 0.5)), np.zeros(2), np.zeros(2))


def test_masked_bce_gradient_zero_at_masked_positions():
    g = Graph()
    p = g.parameter("p", np.array([0.3, 0.6, 0.2]))
    loss = g.masked_bce(p, np.array([0.0, 1.0, 0.0]), np.array([1.0, 1.0, 0.0]))

    grad = g.backward(loss)["p"]

    assert grad[2] == 0.0
    assert grad[0] == pytest.approx(1.0 / 0.7 / 2.0)
    assert grad[1] == pytest.approx(-1.0 / 0.6 / 2.0)
