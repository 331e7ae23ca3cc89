import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tuckerzip.tensor import (dematricize, inverse_permutation, matricize, mode_product, norm_sq,
                              sse_between, transpose)


def test_matricize_matrix():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matricize(m, 0), m)
    assert np.array_equal(matricize(m, 1), [[1, 3], [2, 4]])


def test_matricize_fiber_enumeration():
    t = np.arange(1.0, 9.0).reshape(2, 2, 2)
    # columns enumerate the remaining indices (i0, i2) lexicographically
    expected = np.empty((2, 4))
    for col, (i0, i2) in enumerate(itertools.product(range(2), range(2))):
        for i1 in range(2):
            expected[i1, col] = t[i0, i1, i2]
    assert np.array_equal(matricize(t, 1), expected)


def test_mode_zero_matricization_is_a_view():
    t = np.arange(24.0).reshape(2, 3, 4)
    m = matricize(t, 0)
    assert np.shares_memory(m, t)
    assert np.array_equal(m.ravel(), t.ravel())


def test_matricize_bad_mode():
    with pytest.raises(ValueError):
        matricize(np.zeros((2, 2)), 2)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=2, max_size=4), st.data())
def test_dematricize_inverts_matricize(shape, data):
    t = np.random.default_rng(len(shape)).standard_normal(shape)
    k = data.draw(st.integers(0, len(shape) - 1))
    assert np.array_equal(dematricize(matricize(t, k), t.shape, k), t)


def test_mode_product_identity_and_oracle():
    rng = np.random.default_rng(0)
    t = rng.standard_normal((2, 2, 2))
    assert np.allclose(mode_product(np.eye(2), t, 1), t)
    m = rng.standard_normal((3, 2))
    out = mode_product(m, t, 1)
    ref = np.zeros((2, 3, 2))
    for i, j, k, l in itertools.product(range(2), range(3), range(2), range(2)):
        ref[i, j, k] += m[j, l] * t[i, l, k]
    assert np.allclose(out, ref, rtol=1e-12, atol=1e-14)


def test_mode_product_orthogonal_preserves_norm():
    rng = np.random.default_rng(1)
    t = rng.standard_normal((4, 5, 3))
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    assert norm_sq(mode_product(q, t, 1)) == pytest.approx(norm_sq(t), rel=1e-12)


def test_mode_product_shape_mismatch():
    with pytest.raises(ValueError):
        mode_product(np.zeros((3, 4)), np.zeros((2, 2, 2)), 0)


def test_mode_product_composes_and_commutes():
    rng = np.random.default_rng(2)
    t = rng.standard_normal((3, 4, 5))
    a, b = rng.standard_normal((2, 4)), rng.standard_normal((4, 4))
    assert np.allclose(mode_product(a @ b, t, 1), mode_product(a, mode_product(b, t, 1), 1),
                       rtol=1e-12, atol=1e-12)
    c = rng.standard_normal((6, 5))
    x = mode_product(c, mode_product(a, t, 1), 2)
    y = mode_product(a, mode_product(c, t, 2), 1)
    assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


def test_transpose_cases():
    t = np.arange(6.0).reshape(2, 3)
    assert transpose(t, (0, 1)) is t
    assert np.array_equal(transpose(t, (1, 0)), t.T)
    r = np.random.default_rng(3).standard_normal((2, 3, 4))
    p = (2, 0, 1)
    out = transpose(r, p)
    assert out.shape == (4, 2, 3)
    for idx in itertools.product(range(4), range(2), range(3)):
        src = [0, 0, 0]
        for i, mode in enumerate(p):
            src[mode] = idx[i]
        assert out[idx] == r[tuple(src)]
    assert np.array_equal(transpose(out, inverse_permutation(p)), r)
    with pytest.raises(ValueError):
        transpose(r, (0, 0, 1))


def test_sse_between():
    assert sse_between([1.0, 2.0], [1.0, 2.0]) == 0
    assert sse_between([1.0, 2.0], [0.0, 0.0]) == 5
    rng = np.random.default_rng(4)
    a, b = rng.standard_normal(1000), rng.standard_normal(1000)
    exact = float(sum((np.longdouble(x) - np.longdouble(y)) ** 2 for x, y in zip(a, b)))
    assert sse_between(a, b) == pytest.approx(exact, rel=1e-12)
    with pytest.raises(ValueError):
        sse_between(np.zeros(2), np.zeros(3))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
              elements=st.floats(-1e3, 1e3)))
def test_reshape_keeps_flat_sequence(a):
    assert np.array_equal(matricize(np.ascontiguousarray(a), 0).ravel(), a.ravel())
