import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockforge.permanent import glynn_permanent, naive_permanent, real_permanent


def test_identity():
    for n in range(1, 8):
        assert glynn_permanent(np.eye(n)) == pytest.approx(1.0)


def test_all_ones_is_factorial():
    for n in range(1, 10):
        assert glynn_permanent(np.ones((n, n))).real == pytest.approx(math.factorial(n), rel=1e-12)


def test_empty_matrix():
    assert glynn_permanent(np.zeros((0, 0))) == 1


def test_non_square_raises():
    with pytest.raises(ValueError):
        glynn_permanent(np.ones((2, 3)))


def test_random_5x5_matches_permutation_sum(rng):
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    assert glynn_permanent(a) == pytest.approx(naive_permanent(a), rel=1e-12)


def test_real_permanent(rng):
    a = rng.normal(size=(6, 6))
    assert real_permanent(a) == pytest.approx(naive_permanent(a).real, rel=1e-12)


def test_two_by_two_closed_form():
    a = np.array([[1 + 2j, 3], [4j, 5 - 1j]])
    assert glynn_permanent(a) == pytest.approx(a[0, 0] * a[1, 1] + a[0, 1] * a[1, 0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_row_and_column_permutation_invariance(n, seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    b = a[r.permutation(n)][:, r.permutation(n)]
    assert glynn_permanent(b) == pytest.approx(glynn_permanent(a), rel=1e-10, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_transpose_invariance(n, seed):
    r = np.random.default_rng(seed)
    a = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    assert glynn_permanent(a.T) == pytest.approx(glynn_permanent(a), rel=1e-10, abs=1e-12)
