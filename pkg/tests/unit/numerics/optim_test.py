import numpy as np
import pytest

from logomr.common import ContractError
from logomr.numerics import AdamState, Graph, ParameterSet, adam_step


def test_zero_gradient_is_fixed_point():
    params = ParameterSet({"w": np.array([1.0, -2.0, 3.5])})
    state = AdamState.for_params(params)

    new_params, new_state = adam_step(params, {"w": np.zeros(3)}, state)

    assert np.array_equal(new_params["w"], params["w"])
    assert new_state.t == 1


def test_first_step_is_about_lr():
    params = ParameterSet({"w": np.zeros(4)})
    state = AdamState.for_params(params, lr=1e-3)

    new_params, _ = adam_step(params, {"w": np.array([0.5, -3.0, 1e-2, 20.0])}, state)

    assert np.allclose(new_params["w"], -1e-3 * np.sign([0.5, -3.0, 1e-2, 20.0]), rtol=1e-4)


def test_first_step_changes_only_nonzero_gradients():
    params = ParameterSet({"a": np.ones(3), "b": np.ones(2)})
    state = AdamState.for_params(params)

    new_params, _ = adam_step(params, {"a": np.array([0.0, 1.0, 0.0]), "b": np.zeros(2)}, state)

    assert new_params["a"][0] == 1.0 and new_params["a"][2] == 1.0
    assert new_params["a"][1] != 1.0
    assert np.array_equal(new_params["b"], params["b"])


def test_inputs_not_mutated():
    params = ParameterSet({"w": np.ones(2)})
    state = AdamState.for_params(params)

    adam_step(params, {"w": np.ones(2)}, state)

    assert np.array_equal(params["w"], np.ones(2))
    assert state.t == 0
    assert np.all(state.m["w"] == 0.0)


def test_quadratic_descent_is_monotone():
    params = ParameterSet({"x": np.array([1.0])})
    state = AdamState.for_params(params, lr=5e-5)
    previous = abs(params["x"][0])

    for _ in range(100):
        g = Graph()
        x = params.bind(g)["x"]
        grads = g.backward(g.mul(x, x))
        params, state = adam_step(params, grads, state)
        current = abs(params["x"][0])
        assert current < previous
        previous = current

    assert state.t == 100


def test_dim_mismatch():
    params = ParameterSet({"w": np.ones(2)})
    with pytest.raises(ContractError, match="'w'"):
        adam_step(params, {"w": np.ones(3)}, AdamState.for_params(params))


def test_name_mismatch():
    params = ParameterSet({"w": np.ones(2)})
    with pytest.raises(ContractError):
        adam_step(params, {"v": np.ones(2)}, AdamState.for_params(params))
