"""
Unit tests for the model zoo: architecture arithmetic and network execution.
"""

import numpy as np
import pytest

from ctclassifier.errors import ShapeError, SpecMismatchError
from ctclassifier.models.network import Network
from ctclassifier.models.zoo import ModelSpec, build_model, build_small_cnn, build_vgg16, describe
from ctclassifier.nn import layers as L
from ctclassifier.nn.params import ParamSet


def test_small_cnn_parameter_count():
    spec = build_small_cnn()
    assert spec.input_shape == (256, 256, 1)
    assert spec.param_count() == 2_116_162
    assert spec.layer_shapes()[-1] == (2,)


def test_vgg16_conv_stack_and_spatial_trace():
    spec = build_vgg16()
    assert spec.input_shape == (224, 224, 3)
    shapes = spec.param_shapes()
    conv_params = sum(
        int(np.prod(s)) for i in spec.conv_layer_indices() for s in shapes[i].values()
    )
    assert conv_params == 14_714_688
    assert len(spec.conv_layer_indices()) == 13

    pool_extents = [shape[0] for layer, shape in zip(spec.layers, spec.layer_shapes()) if layer.kind == "maxpool"]
    assert pool_extents == [112, 56, 28, 14, 7]
    assert spec.param_count() == 14_714_688 + 512 * 2 + 2


def test_reduced_input_sizes():
    assert build_model("small-cnn", 32).input_shape == (32, 32, 1)
    assert build_model("vgg16", 32).layer_shapes()[-1] == (2,)
    with pytest.raises(ValueError):
        build_model("resnet50")


def test_spec_requires_softmax_head():
    with pytest.raises(ShapeError):
        ModelSpec("small-cnn", (4, 4, 1), (L.flatten(), L.dense(2)))
    with pytest.raises(ShapeError):
        ModelSpec("small-cnn", (4, 4, 1), (L.flatten(), L.dense(3), L.softmax_layer()))


def test_spec_dict_round_trip():
    spec = build_vgg16(input_size=32)
    assert ModelSpec.from_dict(spec.to_dict()) == spec


def test_describe_lists_every_layer(tiny_spec):
    lines = describe(tiny_spec)
    assert len(lines) == len(tiny_spec.layers)
    assert "softmax" in lines[-1]


def test_network_probabilities_sum_to_one(tiny_spec, rng):
    network = Network.initialise(tiny_spec, seed=3)
    probs = network.predict_proba(rng.random((4,) + tiny_spec.input_shape))
    assert probs.shape == (4, 2)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_initialisation_is_seeded(tiny_spec):
    first = Network.initialise(tiny_spec, seed=5).params
    second = Network.initialise(tiny_spec, seed=5).params
    for (_, _, a), (_, _, b) in zip(first.items(), second.items()):
        np.testing.assert_array_equal(a, b)
    biases = [t for _, name, t in first.items() if name == "bias"]
    assert all(np.all(b == 0) for b in biases)


def test_network_rejects_wrong_batch_shape(tiny_spec):
    network = Network.initialise(tiny_spec)
    with pytest.raises(ShapeError):
        network.forward(np.zeros((1, 9, 9, 1)))


def test_network_rejects_mismatched_params(tiny_spec):
    params = Network.initialise(tiny_spec).params
    params.layers[0] = {"weights": np.zeros((3, 3, 1, 5)), "bias": np.zeros(5)}
    with pytest.raises(SpecMismatchError):
        Network(tiny_spec, params)


def test_backward_leaves_frozen_gradients_zero(tiny_spec, rng):
    network = Network.initialise(tiny_spec, seed=1)
    conv = tiny_spec.conv_layer_indices()
    network.params = network.params.with_frozen(conv)
    probs, caches = network.forward(rng.random((2,) + tiny_spec.input_shape))
    grads = network.backward(probs - np.array([[1.0, 0.0], [0.0, 1.0]]), caches)
    for index in conv:
        assert all(np.all(g == 0) for g in grads[index].values())
    dense = [i for i, layer in enumerate(tiny_spec.layers) if layer.kind == "dense"]
    assert any(np.any(g != 0) for i in dense for g in grads[i].values())


@pytest.mark.slow
def test_vgg16_full_resolution_forward():
    network = Network.initialise(build_vgg16(), seed=0)
    probs = network.predict_proba(np.random.default_rng(0).random((1, 224, 224, 3)))
    np.testing.assert_allclose(probs.sum(), 1.0, atol=1e-5)
