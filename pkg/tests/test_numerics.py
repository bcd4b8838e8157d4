import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langevin_bench.numerics import (
    NonFiniteError,
    RngStream,
    as_vector,
    finite_diff_grad,
    gaussian_vector,
    log_sum_exp,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_gaussian_zero_std_is_zero():
    assert np.array_equal(gaussian_vector(RngStream(3), 3, 0.0), np.zeros(3))


def test_gaussian_mean_and_variance():
    z = gaussian_vector(RngStream(11), 10**6, 1.0)
    assert abs(z.mean()) < 0.005
    w = gaussian_vector(RngStream(12), 10**6, 2.0)
    assert abs(w.var() - 4.0) < 0.05


def test_gaussian_rejects_bad_args():
    with pytest.raises(ValueError):
        gaussian_vector(RngStream(0), 0)
    with pytest.raises(ValueError):
        gaussian_vector(RngStream(0), 2, -1.0)


def test_rng_same_key_same_draws():
    a = RngStream(5, 2).normal(100)
    b = RngStream(5, 2).normal(100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, RngStream(5, 3).normal(100))


def test_rng_streams_uncorrelated():
    a = RngStream(9, 0).normal(10**5)
    b = RngStream(9, 1).normal(10**5)
    c = RngStream(9, 0).derive(4).normal(10**5)
    for x, y in ((a, b), (a, c), (b, c)):
        assert abs(np.corrcoef(x, y)[0, 1]) < 0.01


def test_derive_depends_only_on_keys():
    parent = RngStream(1, 7)
    parent.normal(50)  # consuming the parent must not move children
    assert np.array_equal(parent.derive(2, 3).normal(5), RngStream(1, 7).derive(2, 3).normal(5))


def test_copy_continues_from_same_position():
    r = RngStream(4)
    r.normal(10)
    c = r.copy()
    assert np.array_equal(r.normal(3), c.normal(3))


def test_rng_rejects_negative_seed():
    with pytest.raises(ValueError):
        RngStream(-1)


def test_finite_diff_examples():
    g = finite_diff_grad(lambda x: float(x[0] ** 2), [1.0], eps=1e-5)
    assert abs(g[0] - 2.0) < 1e-8
    assert np.array_equal(finite_diff_grad(lambda x: 3.0, np.ones(4)), np.zeros(4))
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(finite_diff_grad(lambda v: 0.5 * float(v @ v), x), x, atol=1e-8)


def test_finite_diff_propagates_nonfinite():
    with pytest.raises(NonFiniteError):
        finite_diff_grad(lambda x: math.inf if x[0] > 0 else 0.0, [0.0])
    with pytest.raises(ValueError):
        finite_diff_grad(lambda x: 0.0, [0.0], eps=0.0)


def test_log_sum_exp_examples():
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2))
    assert log_sum_exp([-3.5]) == -3.5
    assert log_sum_exp([-1000.0, -1000.0]) == pytest.approx(-1000 + math.log(2))
    with pytest.raises(ValueError):
        log_sum_exp([])


def test_log_sum_exp_axis_matches_rows():
    v = np.array([[0.0, 1.0, -np.inf], [-np.inf, -np.inf, -np.inf]])
    out = log_sum_exp(v, axis=1)
    assert out[0] == pytest.approx(math.log(1 + math.e))
    assert out[1] == -np.inf


@given(st.lists(finite, min_size=1, max_size=20), finite)
def test_log_sum_exp_shift(v, c):
    assert log_sum_exp(np.asarray(v) + c) == pytest.approx(log_sum_exp(v) + c, abs=1e-9)


@settings(max_examples=50)
@given(st.lists(finite, min_size=1, max_size=6))
def test_finite_diff_quadratic_form(x):
    x = np.asarray(x)
    g = finite_diff_grad(lambda v: 0.5 * float(v @ v), x)
    assert np.allclose(g, x, rtol=1e-7, atol=1e-6)


def test_as_vector_checks_length():
    assert as_vector([[1, 2], [3, 4]]).shape == (4,)
    with pytest.raises(ValueError):
        as_vector([1.0, 2.0], 3)
