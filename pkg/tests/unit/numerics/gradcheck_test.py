import numpy as np
import pytest

from logomr.common import ContractError
from logomr.numerics import ParameterSet, grad_check


RNG = np.random.default_rng(2024)


def test_quadratic_form():
    a = RNG.normal(size=(4, 4))
    params = ParameterSet({"x": RNG.normal(size=(4, 1))})

    def loss_fn(g, p):
        x = p["x"]
        return g.sum(g.mul(x, g.matmul(g.constant(a), x)))

    assert grad_check(loss_fn, params, eps=1e-3) <= 1e-9


def test_sigmoid_bce_composite():
    y = np.array([0.0, 1.0, 0.0, 0.0])
    delta = np.array([1.0, 1.0, 1.0, 0.0])
    params = ParameterSet({"w": RNG.normal(size=(3, 4)) * 0.5, "b": RNG.normal(size=4) * 0.1})
    z = RNG.normal(size=(1, 3))

    def loss_fn(g, p):
        return g.masked_bce(g.reshape(g.sigmoid(g.linear(g.constant(z), p["w"], p["b"])), (4,)), y, delta)

    assert grad_check(loss_fn, params, eps=1e-3) <= 1e-5


@pytest.mark.parametrize("op", ["gelu", "tanh", "sigmoid", "relu"])
def test_activations(op):
    params = ParameterSet({"x": RNG.normal(size=(3, 5)) + 0.05})

    def loss_fn(g, p):
        return g.mean(g.mul(getattr(g, op)(p["x"]), g.constant(np.arange(15, dtype=float).reshape(3, 5))))

    assert grad_check(loss_fn, params, eps=1e-5) <= 1e-4


def test_softmax_and_layer_norm():
    params = ParameterSet({"x": RNG.normal(size=(4, 6)), "gamma": RNG.normal(size=6), "beta": RNG.normal(size=6)})
    target = RNG.normal(size=(4, 6))

    def loss_fn(g, p):
        normed = g.layer_norm(p["x"], p["gamma"], p["beta"])
        return g.sum(g.mul(g.softmax(normed, axis=-1), g.constant(target)))

    assert grad_check(loss_fn, params, eps=1e-4) <= 1e-4


def test_conv_and_pool():
    params = ParameterSet({"k": RNG.normal(size=(2, 3, 3, 3)), "b": RNG.normal(size=2)})
    x = RNG.normal(size=(2, 3, 6, 6))

    def loss_fn(g, p):
        return g.mean(g.max_pool2d(g.conv2d(g.constant(x), p["k"], p["b"])))

    assert grad_check(loss_fn, params, eps=1e-6) <= 1e-5


def test_coordinate_sampling_limits_work():
    params = ParameterSet({"x": RNG.normal(size=(50,))})

    def loss_fn(g, p):
        return g.sum(g.mul(p["x"], p["x"]))

    assert grad_check(loss_fn, params, eps=1e-3, max_coords_per_param=5) <= 1e-9


def test_non_positive_eps():
    with pytest.raises(ContractError):
        grad_check(lambda g, p: g.sum(p["x"]), ParameterSet({"x": np.ones(1)}), eps=0.0)
