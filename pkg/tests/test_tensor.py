import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dragonfruit import tensor
from dragonfruit.errors import ShapeError

shapes = st.lists(st.integers(1, 6), min_size=1, max_size=4).map(tuple)


def test_create_fill_and_dtype():
    t = tensor.create((256, 256, 3), fill=1.0)
    assert t.shape == (256, 256, 3)
    assert t.dtype == np.float32
    assert (t == 1.0).all()
    assert t.size == 196_608


def test_create_rejects_bad_extents():
    with pytest.raises(ShapeError):
        tensor.create((0, 3))
    with pytest.raises(ShapeError):
        tensor.create((2, -1))
    with pytest.raises(ShapeError):
        tensor.create(())


def test_map_elementwise_normalizes_pixels():
    t = tensor.create((2, 2), fill=255.0)
    out = tensor.map_elementwise(t, lambda v: v / 255.0)
    assert out.shape == t.shape
    assert out.dtype == t.dtype
    assert np.allclose(out, 1.0)


@given(shapes, st.floats(-100, 100))
def test_map_elementwise_matches_scalar_loop(shape, fill):
    t = tensor.create(shape, fill=fill)
    f = lambda v: 2.0 * v + 1.0
    out = tensor.map_elementwise(t, f)
    expected = np.empty_like(t)
    flat_in, flat_out = t.ravel(), expected.ravel()
    for i in range(t.size):
        flat_out[i] = f(float(flat_in[i]))
    assert np.array_equal(out, expected)
    assert np.isfinite(out).all()


def test_reshape_row_major_order():
    t = np.arange(6, dtype=np.float32).reshape(2, 3)
    out = tensor.reshape(t, (3, 2))
    assert out.tolist() == [[0, 1], [2, 3], [4, 5]]


@given(shapes)
def test_reshape_flatten_round_trip(shape):
    n = math.prod(shape)
    t = np.arange(n, dtype=np.float32).reshape(shape)
    flat = tensor.reshape(t, (n,))
    back = tensor.reshape(flat, shape)
    assert np.array_equal(back, t)


def test_reshape_rejects_element_count_mismatch():
    t = tensor.create((2, 3))
    with pytest.raises(ShapeError):
        tensor.reshape(t, (4, 2))
    with pytest.raises(ShapeError):
        tensor.reshape(t, (6, 0))


def test_element_count():
    assert tensor.element_count((256, 256, 3)) == 196_608
    assert tensor.element_count((1,)) == 1
