"""
Unit tests for tensor helpers and the conv/pool/softmax kernels.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctclassifier.errors import ShapeError
from ctclassifier.tensor.core import as_shape, element_count, elementwise, matmul, tensor
from ctclassifier.tensor.kernels import conv2d, conv_geometry, pool2d, softmax


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def naive_conv2d(x, kernels, bias, padding, stride):
    n, h, w, cin = x.shape
    kh, kw, _, cout = kernels.shape
    geom = conv_geometry(h, w, kh, kw, padding, stride)
    xp = np.pad(x, ((0, 0), (geom.pad_top, geom.pad_bottom), (geom.pad_left, geom.pad_right), (0, 0)))
    out = np.zeros((n, geom.out_h, geom.out_w, cout))
    for b in range(n):
        for i in range(geom.out_h):
            for j in range(geom.out_w):
                for o in range(cout):
                    total = bias[o]
                    for di in range(kh):
                        for dj in range(kw):
                            for c in range(cin):
                                total += xp[b, i * stride + di, j * stride + dj, c] * kernels[di, dj, c, o]
                    out[b, i, j, o] = total
    return out


def naive_pool(x, kind, window, stride):
    n, h, w, c = x.shape
    oh, ow = (h - window) // stride + 1, (w - window) // stride + 1
    out = np.zeros((n, oh, ow, c))
    for b in range(n):
        for i in range(oh):
            for j in range(ow):
                for ch in range(c):
                    patch = x[b, i * stride:i * stride + window, j * stride:j * stride + window, ch]
                    out[b, i, j, ch] = patch.max() if kind == "max" else patch.mean()
    return out


def test_shape_rules():
    assert as_shape([2, 3, 4]) == (2, 3, 4)
    assert element_count((2, 3, 4)) == 24
    with pytest.raises(ShapeError):
        as_shape([2, 0])
    with pytest.raises(ShapeError):
        as_shape([1, 1, 1, 1, 1])


def test_elementwise_examples():
    np.testing.assert_array_equal(elementwise("add", tensor([1, 2]), tensor([3, 4])), [4, 6])
    np.testing.assert_array_equal(elementwise("max", tensor([-1, 0, 2]), 0), [0, 0, 2])
    np.testing.assert_array_equal(elementwise("mul", tensor([2, 3]), 0), [0, 0])


def test_elementwise_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2,\).*\(3,\)"):
        elementwise("add", tensor([1, 2]), tensor([1, 2, 3]))


def test_matmul_examples(rng):
    np.testing.assert_array_equal(matmul(np.eye(2), tensor([[5, 6], [7, 8]])), [[5, 6], [7, 8]])
    np.testing.assert_array_equal(matmul(tensor([[1, 2]]), tensor([[3], [4]])), [[11]])
    a, b = rng.normal(size=(4, 5)), rng.normal(size=(5, 3))
    np.testing.assert_allclose(matmul(a, b), naive_matmul(a, b), atol=1e-12)
    with pytest.raises(ShapeError):
        matmul(a, a)


def test_conv2d_identity_and_ones_kernel():
    x = tensor([[1, 2, 3], [4, 5, 6], [7, 8, 9]]).reshape(1, 3, 3, 1)
    identity = np.zeros((3, 3, 1, 1))
    identity[1, 1, 0, 0] = 1.0
    np.testing.assert_array_equal(conv2d(x, identity, np.zeros(1)), x)

    ones = np.ones((3, 3, 1, 1))
    out = conv2d(x, ones, np.zeros(1))
    assert out[0, 0, 0, 0] == 1 + 2 + 4 + 5
    assert out[0, 1, 1, 0] == 45


def test_conv2d_valid_kernel_too_large():
    with pytest.raises(ShapeError):
        conv2d(np.ones((1, 2, 2, 1)), np.ones((3, 3, 1, 1)), np.zeros(1), padding="valid")


def test_conv2d_matches_nested_loop_oracle(rng):
    x = rng.normal(size=(1, 8, 8, 2))
    kernels = rng.normal(size=(3, 3, 2, 4))
    bias = rng.normal(size=4)
    np.testing.assert_allclose(conv2d(x, kernels, bias), naive_conv2d(x, kernels, bias, "same", 1), atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    h=st.integers(3, 8), w=st.integers(3, 8),
    k=st.sampled_from([1, 2, 3]),
    cin=st.integers(1, 3), cout=st.integers(1, 3),
    padding=st.sampled_from(["same", "valid"]),
    stride=st.integers(1, 2),
)
def test_conv2d_random_oracle(seed, h, w, k, cin, cout, padding, stride):
    g = np.random.default_rng(seed)
    x = g.normal(size=(2, h, w, cin))
    kernels = g.normal(size=(k, k, cin, cout))
    bias = g.normal(size=cout)
    expected = naive_conv2d(x, kernels, bias, padding, stride)
    np.testing.assert_allclose(conv2d(x, kernels, bias, padding, stride), expected, rtol=1e-10, atol=1e-10)


@given(size=st.integers(1, 9), k=st.sampled_from([1, 3, 5, 7]))
def test_same_padding_preserves_extent_for_odd_kernels(size, k):
    geom = conv_geometry(size, size, k, k, "same", 1)
    assert (geom.out_h, geom.out_w) == (size, size)


def test_pool2d_examples():
    x = tensor([[1, 2], [3, 4]]).reshape(1, 2, 2, 1)
    assert pool2d(x, "max", 2).output.item() == 4
    assert pool2d(x, "average", 2).output.item() == 2.5
    constant = np.full((1, 4, 4, 2), 0.7)
    np.testing.assert_array_equal(pool2d(constant, "max", 2).output, np.full((1, 2, 2, 2), 0.7))
    with pytest.raises(ShapeError):
        pool2d(np.ones((1, 1, 1, 1)), "max", 2)


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    h=st.integers(2, 8), w=st.integers(2, 8),
    window=st.integers(1, 2), stride=st.integers(1, 2),
    kind=st.sampled_from(["max", "average"]),
)
def test_pool2d_random_oracle(seed, h, w, window, stride, kind):
    x = np.random.default_rng(seed).normal(size=(2, h, w, 3))
    np.testing.assert_allclose(pool2d(x, kind, window, stride).output, naive_pool(x, kind, window, stride),
                               rtol=1e-10, atol=1e-12)


def test_softmax_examples():
    np.testing.assert_allclose(softmax(tensor([[0, 0]])), [[0.5, 0.5]], atol=1e-15)
    np.testing.assert_allclose(softmax(tensor([[math.log(2), 0]])), [[2 / 3, 1 / 3]], atol=1e-15)
    big = softmax(tensor([[1000, 0]]))
    assert np.all(np.isfinite(big))
    assert big[0, 0] == pytest.approx(1.0) and big[0, 1] == pytest.approx(0.0, abs=1e-300)


@given(
    logits=st.lists(st.floats(-50, 50), min_size=2, max_size=6),
    shift=st.floats(-100, 100),
)
def test_softmax_rows_normalised_and_shift_invariant(logits, shift):
    row = np.array([logits])
    probs = softmax(row)
    assert abs(probs.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(softmax(row + shift), probs, atol=1e-12)
