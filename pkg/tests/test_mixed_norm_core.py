from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from widths_lab.mixed_norm_core import (
    SpaceSpec, check_exponent, convexity_bound_slack, dual_attainer, dual_exponent, find_c1,
    interpolation_slack, lambda_vec, mixed_norm, norm_gradient, norm_interpolation_slack,
    rearrange_nonincreasing,
)

exps = st.floats(1.05, 8.0)
mats = arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=st.floats(-10, 10))


def test_mixed_norm_examples():
    assert mixed_norm(np.ones((2, 2)), 2, 2) == pytest.approx(2.0)
    assert mixed_norm(np.array([[3.0, 0.0], [0.0, 4.0]]), 1, 2) == pytest.approx(5.0)
    assert mixed_norm(np.zeros((3, 2)), 3, 4) == 0.0


def test_mixed_norm_batch_matches_single():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((5, 3, 2))
    batch = mixed_norm(X, 3, 1.5)
    assert np.allclose(batch, [mixed_norm(x, 3, 1.5) for x in X])


def test_dual_exponent_exact():
    assert dual_exponent(2) == 2
    assert dual_exponent(4) == Fraction(4, 3)
    assert dual_exponent(Fraction(3, 2)) == 3
    assert dual_exponent(3.0) == pytest.approx(1.5)


@pytest.mark.parametrize("bad", [1, 0.5, float("inf"), float("nan"), True])
def test_check_exponent_rejects(bad):
    with pytest.raises(ValueError):
        check_exponent(bad)


def test_space_spec():
    s = SpaceSpec(2, 3, 4, Fraction(3, 2))
    assert s.dim == 6 and s.shape == (2, 3)
    assert s.dual() == SpaceSpec(2, 3, Fraction(4, 3), 3)
    with pytest.raises(ValueError):
        SpaceSpec(0, 1, 2, 2)


def test_rearrange():
    assert rearrange_nonincreasing([-3, 1, 2]).tolist() == [3, 2, 1]
    assert rearrange_nonincreasing([0, 0, 0]).tolist() == [0, 0, 0]
    assert rearrange_nonincreasing([1, 1, 5, 1]).tolist() == [5, 1, 1, 1]


def test_lambda_vec_values():
    assert lambda_vec(2, 2) == 1
    assert lambda_vec(4, 4) == 0
    assert lambda_vec(4, 8) == Fraction(1, 3)
    assert lambda_vec(Fraction(3, 2), 4) == 1
    assert lambda_vec(3, 6) == Fraction(1, 2)
    with pytest.raises(ValueError):
        lambda_vec(4, 3)


@settings(max_examples=200, deadline=None)
@given(mats, exps, exps, st.floats(-5, 5))
def test_homogeneity(x, p, q, t):
    a = mixed_norm(t * x, p, q)
    b = abs(t) * mixed_norm(x, p, q)
    assert abs(a - b) <= 1e-12 * max(b, 1e-300) + 1e-300


@settings(max_examples=200, deadline=None)
@given(mats, exps)
def test_collapse_to_flat_norm(x, p):
    s = np.abs(x).max()
    flat = s * np.sum((np.abs(x) / s) ** p) ** (1 / p) if s > 0 else 0.0
    assert mixed_norm(x, p, p) == pytest.approx(flat, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), exps, exps, st.integers(0, 10 ** 6))
def test_duality_pairing_and_attainer(m, k, p, q, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((m, k)), rng.standard_normal((m, k))
    pd, qd = dual_exponent(p), dual_exponent(q)
    assert abs(np.sum(x * y)) <= mixed_norm(x, p, q) * mixed_norm(y, pd, qd) * (1 + 1e-12)
    g = norm_gradient(x, p, q)
    assert np.sum(g * x) == pytest.approx(mixed_norm(x, p, q), rel=1e-9)
    assert mixed_norm(g, pd, qd) == pytest.approx(1.0, rel=1e-9)
    z = dual_attainer(y, p, q)
    assert mixed_norm(z, p, q) == pytest.approx(1.0, rel=1e-9)
    assert np.sum(z * y) == pytest.approx(mixed_norm(y, pd, qd), rel=1e-9)


def test_interpolation_examples():
    assert interpolation_slack([1.0], [1.0], 2, 4, 1) == pytest.approx(0, abs=1e-15)
    assert interpolation_slack([0.0, 0.0], [0.0, 0.0], 3, 5, 0.4) == 0
    rng = np.random.default_rng(3)
    for _ in range(200):
        assert interpolation_slack(rng.random(8), rng.random(8), 2, 4, 1) >= -1e-12


def test_interpolation_domain():
    with pytest.raises(ValueError):
        interpolation_slack([1.0], [1.0], 1.5, 4, 0.5)
    with pytest.raises(ValueError):
        interpolation_slack([1.0], [1.0], 4, 8, 0.5)


def test_convexity_examples():
    assert convexity_bound_slack(np.zeros(4), 2, 3, 0.7) == pytest.approx(4 ** 1.5 / 2)
    for c1 in (0.5, 1.5, 2.0):
        assert convexity_bound_slack(np.ones(2), 2, 2, c1) == pytest.approx(3 - 2 * c1)


def test_find_c1():
    c = find_c1(2, 2, 300, seed=1)
    assert 0 < c <= 1.5
    assert find_c1(2, 3, 200, seed=5) == find_c1(2, 3, 200, seed=5)
    with pytest.raises(ValueError):
        find_c1(2, 2, 0)
    c = find_c1(2, 3, 500, seed=0)
    rng = np.random.default_rng(11)
    for _ in range(300):
        assert convexity_bound_slack(rng.uniform(-5, 5, 6), 2, 3, c) >= -1e-12


def test_norm_interpolation_examples():
    x = np.zeros((3, 2))
    assert norm_interpolation_slack(x, 3, 3, 6, 6, 0.5) == 0
    x[1, 1] = -2.5
    assert norm_interpolation_slack(x, 3, 3, 6, 6, 0.5) == pytest.approx(0, abs=1e-12)
    rng = np.random.default_rng(4)
    lam = float(lambda_vec(3, 6))
    assert lam == 0.5
    for _ in range(200):
        assert norm_interpolation_slack(rng.standard_normal((4, 4)), 3, 3, 6, 6, lam) >= -1e-12
    with pytest.raises(ValueError):
        norm_interpolation_slack(x, 3, 3, 2.5, 6, 0.1)
    with pytest.raises(ValueError):
        norm_interpolation_slack(x, 3, 3, 6, 6, 0.9)
