import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefccd.banded import SingularSystemError, block_thomas, cyclic_block_thomas, small_solve


def _dense(lower, diag, upper, periodic=False):
    n = len(diag)
    A = np.zeros((2 * n, 2 * n))
    for i in range(n):
        A[2 * i:2 * i + 2, 2 * i:2 * i + 2] = diag[i]
        if i > 0:
            A[2 * i:2 * i + 2, 2 * i - 2:2 * i] = lower[i]
        if i < n - 1:
            A[2 * i:2 * i + 2, 2 * i + 2:2 * i + 4] = upper[i]
    if periodic:
        A[0:2, -2:] = lower[0]
        A[-2:, 0:2] = upper[-1]
    return A


def _random_system(seed, n):
    rng = np.random.default_rng(seed)
    lower = rng.normal(size=(n, 2, 2))
    upper = rng.normal(size=(n, 2, 2))
    diag = rng.normal(size=(n, 2, 2)) + 6 * np.eye(2)
    rhs = rng.normal(size=(n, 2))
    return lower, diag, upper, rhs


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30))
def test_block_thomas_matches_dense(seed, n):
    lower, diag, upper, rhs = _random_system(seed, n)
    x = block_thomas(lower, diag, upper, rhs)
    ref = np.linalg.solve(_dense(lower, diag, upper), rhs.ravel())
    assert np.allclose(x.ravel(), ref, rtol=1e-11, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 30))
def test_cyclic_matches_dense(seed, n):
    lower, diag, upper, rhs = _random_system(seed, n)
    x = cyclic_block_thomas(lower, diag, upper, rhs)
    ref = np.linalg.solve(_dense(lower, diag, upper, periodic=True), rhs.ravel())
    assert np.allclose(x.ravel(), ref, rtol=1e-10, atol=1e-11)


def test_multiple_right_hand_sides():
    lower, diag, upper, _ = _random_system(1, 7)
    rhs = np.random.default_rng(2).normal(size=(7, 2, 3))
    x = block_thomas(lower, diag, upper, rhs)
    for k in range(3):
        assert np.allclose(x[..., k], block_thomas(lower, diag, upper, rhs[..., k]))


def test_dtype_is_preserved():
    lower, diag, upper, rhs = _random_system(3, 5)
    x = block_thomas(*(a.astype(np.longdouble) for a in (lower, diag, upper, rhs)))
    assert x.dtype == np.longdouble


def test_singular_pivot_reports_row():
    n = 4
    diag = np.tile(np.eye(2), (n, 1, 1))
    diag[2] = 0.0
    zeros = np.zeros((n, 2, 2))
    with pytest.raises(SingularSystemError) as info:
        block_thomas(zeros, diag, zeros, np.ones((n, 2)))
    assert info.value.index == 2


def test_shape_mismatch():
    lower, diag, upper, rhs = _random_system(0, 4)
    with pytest.raises(ValueError):
        block_thomas(lower, diag, upper, rhs[:3])


def test_small_solve_pivots_and_raises():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(small_solve(a, np.array([2.0, 3.0])), [3.0, 2.0])
    with pytest.raises(SingularSystemError):
        small_solve(np.ones((2, 2)), np.ones(2))
