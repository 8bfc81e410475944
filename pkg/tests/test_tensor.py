"""Tests for dense-array primitives"""
import numpy as np
import pytest

from app.models.tensor import (
    col2im,
    conv2d,
    conv2d_with_cols,
    conv_output_size,
    im2col,
    l2_distance,
    matmul_affine,
    pad2d,
)
from app.utils.errors import ShapeError


def naive_conv2d(x, kernels, bias, stride, padding):
    """Direct nested-loop cross-correlation"""
    c_in, height, width = x.shape
    c_out, _, kh, kw = kernels.shape
    padded = np.zeros((c_in, height + 2 * padding, width + 2 * padding))
    padded[:, padding : padding + height, padding : padding + width] = x
    out_h = (height + 2 * padding - kh) // stride + 1
    out_w = (width + 2 * padding - kw) // stride + 1
    out = np.zeros((c_out, out_h, out_w))
    for o in range(c_out):
        for r in range(out_h):
            for c in range(out_w):
                total = bias[o]
                for ci in range(c_in):
                    for i in range(kh):
                        for j in range(kw):
                            total += kernels[o, ci, i, j] * padded[ci, r * stride + i, c * stride + j]
                out[o, r, c] = total
    return out


def test_conv2d_matches_nested_loops():
    """Test conv2d against a brute-force oracle on 120 random configurations"""
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 120:
        # Arrange
        c_in, c_out = rng.integers(1, 4, size=2)
        k = int(rng.integers(1, 4))
        stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, 3))
        size = int(rng.integers(k, 8))
        if (size + 2 * padding - k) % stride:
            continue
        x = rng.standard_normal((c_in, size, size))
        kernels = rng.standard_normal((c_out, c_in, k, k))
        bias = rng.standard_normal(c_out)

        # Act
        out = conv2d(x, kernels, bias, stride, padding)

        # Assert
        np.testing.assert_allclose(out, naive_conv2d(x, kernels, bias, stride, padding), rtol=1e-10, atol=1e-10)
        checked += 1


def test_conv2d_batch_equals_per_image():
    """Test that a batch convolves every image independently"""
    # Arrange
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 2, 7, 7))
    kernels = rng.standard_normal((3, 2, 3, 3))
    bias = rng.standard_normal(3)

    # Act
    batched = conv2d(x, kernels, bias, padding=1)

    # Assert
    for b in range(4):
        np.testing.assert_allclose(batched[b], conv2d(x[b], kernels, bias, padding=1))


def test_conv2d_shape_errors():
    """Test channel, bias and geometry mismatches"""
    x = np.zeros((2, 5, 5))
    with pytest.raises(ShapeError):
        conv2d(x, np.zeros((1, 3, 3, 3)), np.zeros(1))
    with pytest.raises(ShapeError):
        conv2d(x, np.zeros((1, 2, 3, 3)), np.zeros(2))
    with pytest.raises(ShapeError):
        conv2d(x, np.zeros((1, 2, 6, 6)), np.zeros(1))
    with pytest.raises(ShapeError):
        conv2d(x, np.zeros((1, 2, 2, 2)), np.zeros(1), stride=2)
    with pytest.raises(ShapeError):
        conv2d(np.zeros((5, 5)), np.zeros((1, 1, 3, 3)), np.zeros(1))


def test_conv_output_size():
    """Test the output-size formula and its non-integral rejection"""
    assert conv_output_size(28, 5, 1, 2) == 28
    assert conv_output_size(14, 5, 1, 0) == 10
    assert conv_output_size(7, 3, 2, 0) == 3
    with pytest.raises(ShapeError):
        conv_output_size(6, 3, 2, 0)


def test_matmul_affine_matches_loops():
    """Test w.x + b against explicit sums on 100 random cases"""
    rng = np.random.default_rng(9)
    for _ in range(100):
        # Arrange
        n_in, n_out = rng.integers(1, 12, size=2)
        x = rng.standard_normal(n_in)
        w = rng.standard_normal((n_out, n_in))
        b = rng.standard_normal(n_out)

        # Act
        out = matmul_affine(x, w, b)

        # Assert
        expected = [sum(w[o, i] * x[i] for i in range(n_in)) + b[o] for o in range(n_out)]
        np.testing.assert_allclose(out, expected, rtol=1e-10, atol=1e-12)


def test_matmul_affine_shape_errors():
    """Test mismatched weights and bias"""
    with pytest.raises(ShapeError):
        matmul_affine(np.zeros(3), np.zeros((2, 4)), np.zeros(2))
    with pytest.raises(ShapeError):
        matmul_affine(np.zeros(4), np.zeros((2, 4)), np.zeros(3))


def test_col2im_is_adjoint_of_im2col():
    """Test <im2col(x), y> == <x, col2im(y)> for strided patches"""
    # Arrange
    rng = np.random.default_rng(4)
    x = rng.standard_normal((2, 3, 9, 9))
    cols = im2col(x, 3, 3, 2)
    y = rng.standard_normal(cols.shape)

    # Act
    back = col2im(y, x.shape, 3, 3, 2)

    # Assert
    assert np.isclose(np.sum(cols * y), np.sum(x * back))


def test_pad2d_zero_border():
    """Test that padding surrounds the image with zeros"""
    # Act
    padded = pad2d(np.ones((1, 1, 2, 2)), 1)

    # Assert
    assert padded.shape == (1, 1, 4, 4)
    assert padded.sum() == 4
    assert padded[0, 0, 0].tolist() == [0, 0, 0, 0]


def test_l2_distance_properties():
    """Test symmetry, identity and a known value"""
    # Arrange
    rng = np.random.default_rng(2)
    a, b = rng.random((1, 28, 28)), rng.random((1, 28, 28))

    # Assert
    assert l2_distance(a, a) == 0.0
    assert l2_distance(a, b) == l2_distance(b, a)
    assert l2_distance(np.zeros(4), np.array([3.0, 4.0, 0.0, 0.0])) == 5.0
    with pytest.raises(ShapeError):
        l2_distance(np.zeros(3), np.zeros(4))


def test_l2_distance_triangle_inequality():
    """Test d(a, c) <= d(a, b) + d(b, c) and non-negativity on random triples"""
    rng = np.random.default_rng(12)
    for _ in range(200):
        # Arrange
        a, b, c = rng.standard_normal((3, 1, 28, 28)) * rng.uniform(0.01, 10.0, size=(3, 1, 1, 1))

        # Act
        ab, bc, ac = l2_distance(a, b), l2_distance(b, c), l2_distance(a, c)

        # Assert
        assert min(ab, bc, ac) >= 0.0
        assert ac <= ab + bc + 1e-9


def test_conv2d_with_cols_returns_backward_inputs():
    """Test the batched form: same output as conv2d plus patches and padded shape"""
    # Arrange
    rng = np.random.default_rng(6)
    x = rng.standard_normal((3, 2, 6, 6)).astype(np.float32)
    kernels = rng.standard_normal((4, 2, 3, 3)).astype(np.float32)
    bias = rng.standard_normal(4).astype(np.float32)

    # Act
    out, cols, padded_shape = conv2d_with_cols(x, kernels, bias, 1, 1)

    # Assert
    assert out.dtype == np.float32
    np.testing.assert_allclose(out, conv2d(x, kernels, bias, padding=1), rtol=1e-6)
    assert padded_shape == (3, 2, 8, 8)
    assert np.array_equal(cols, im2col(pad2d(x, 1), 3, 3, 1))


def test_outputs_are_finite_for_finite_inputs():
    """Test that large but finite operands never produce NaN or Inf"""
    # Arrange
    rng = np.random.default_rng(13)
    x = rng.uniform(-1e3, 1e3, (2, 3, 8, 8))
    kernels = rng.uniform(-1e3, 1e3, (2, 3, 3, 3))
    bias = rng.uniform(-1e3, 1e3, 2)
    vector = rng.uniform(-1e3, 1e3, (4, 50))
    weights = rng.uniform(-1e3, 1e3, (7, 50))

    # Act
    outputs = [
        conv2d(x, kernels, bias, stride=1, padding=1),
        matmul_affine(vector, weights, rng.uniform(-1e3, 1e3, 7)),
        np.array(l2_distance(x, -x)),
    ]

    # Assert
    for out in outputs:
        assert np.all(np.isfinite(out))
