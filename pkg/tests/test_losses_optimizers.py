"""
Unit tests for cross-entropy and the SGD/Adam update rules.
"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ctclassifier.errors import ConfigError, LabelError, NumericalError, ShapeError
from ctclassifier.nn.losses import cross_entropy_loss, one_hot
from ctclassifier.nn.optimizers import OptimizerConfig, OptimizerState, optimizer_step
from ctclassifier.nn.params import ParamSet


def single_param(value, frozen=()):
    return ParamSet([{"weights": np.array([value], dtype=np.float64)}], frozen)


def test_cross_entropy_examples():
    loss, _ = cross_entropy_loss(np.array([[0.5, 0.5]]), one_hot([0]))
    assert loss == pytest.approx(math.log(2), abs=1e-6)
    loss, _ = cross_entropy_loss(np.array([[1 - 1e-12, 1e-12]]), one_hot([0]))
    assert 0 <= loss <= 1e-11


def test_cross_entropy_clamps_zero_probability():
    loss, _ = cross_entropy_loss(np.array([[1.0, 0.0]]), one_hot([1]))
    assert math.isfinite(loss)
    assert loss == pytest.approx(-math.log(1e-12))


def test_cross_entropy_gradient_is_fused():
    probs = np.array([[0.7, 0.3], [0.2, 0.8]])
    labels = one_hot([0, 0])
    _, grad = cross_entropy_loss(probs, labels)
    np.testing.assert_allclose(grad, (probs - labels) / 2)


def test_malformed_labels_rejected():
    with pytest.raises(LabelError):
        cross_entropy_loss(np.array([[0.5, 0.5]]), np.array([[1.0, 1.0]]))
    with pytest.raises(LabelError):
        cross_entropy_loss(np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]]))
    with pytest.raises(ShapeError):
        cross_entropy_loss(np.array([[0.5, 0.5]]), one_hot([0, 1]))
    with pytest.raises(LabelError):
        one_hot([0, 2])


@given(p=st.floats(1e-6, 1 - 1e-6), label=st.integers(0, 1))
def test_cross_entropy_non_negative(p, label):
    loss, _ = cross_entropy_loss(np.array([[p, 1 - p]]), one_hot([label]))
    assert loss >= 0


def test_sgd_step():
    params = single_param(1.0)
    grads = single_param(0.5)
    optimizer_step(params, grads, OptimizerState(), OptimizerConfig("sgd", lr=0.1))
    assert params[0]["weights"][0] == pytest.approx(0.95)


@pytest.mark.parametrize("g", [0.5, -3.0, 1e-3])
def test_adam_first_step_moves_by_lr(g):
    params = single_param(1.0)
    optimizer_step(params, single_param(g), OptimizerState(), OptimizerConfig("adam", lr=1e-3))
    assert params[0]["weights"][0] == pytest.approx(1.0 - 1e-3 * np.sign(g), abs=1e-6)


@pytest.mark.parametrize("kind", ["sgd", "adam"])
def test_zero_gradient_is_fixed_point(kind):
    params = single_param(0.25)
    state = OptimizerState()
    for _ in range(3):
        optimizer_step(params, single_param(0.0), state, OptimizerConfig(kind))
    assert params[0]["weights"][0] == 0.25
    assert state.step == 3


def test_frozen_layers_untouched():
    params = ParamSet([{"weights": np.ones(2)}, {"weights": np.ones(2)}], frozen=[0])
    grads = ParamSet([{"weights": np.ones(2)}, {"weights": np.ones(2)}])
    optimizer_step(params, grads, OptimizerState(), OptimizerConfig("sgd", lr=0.5))
    np.testing.assert_array_equal(params[0]["weights"], [1, 1])
    np.testing.assert_array_equal(params[1]["weights"], [0.5, 0.5])


def test_non_finite_gradient_names_parameter_and_leaves_params():
    params = ParamSet([{"weights": np.ones(2), "bias": np.zeros(1)}])
    grads = ParamSet([{"weights": np.ones(2), "bias": np.array([np.nan])}])
    with pytest.raises(NumericalError, match="layer 0 bias"):
        optimizer_step(params, grads, OptimizerState(), OptimizerConfig())
    np.testing.assert_array_equal(params[0]["weights"], [1, 1])


def test_incongruent_gradients_rejected():
    with pytest.raises(ShapeError):
        optimizer_step(single_param(1.0), ParamSet([{"weights": np.ones(3)}]), OptimizerState(), OptimizerConfig())


def test_invalid_optimizer_config():
    with pytest.raises(ConfigError):
        OptimizerConfig("rmsprop")
    with pytest.raises(ConfigError):
        OptimizerConfig(lr=0)
    with pytest.raises(ConfigError):
        OptimizerConfig(beta1=1.0)
