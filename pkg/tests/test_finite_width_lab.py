from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from widths_lab.finite_width_lab import (
    SearchConfig, averaged_lower_bound, distance_to_subspace, distances, duality_gap, gluskin_vertices,
    kolmogorov_sweep, kolmogorov_width_ball, kolmogorov_width_points, linear_width_estimate,
    operator_norm, reevaluate, subadditivity_check,
)
from widths_lab.mixed_norm_core import SpaceSpec, mixed_norm

FAST = SearchConfig(restarts=2, outer_iters=90, rounds=4, ascent_starts=8, ascent_iters=150, hops=2)


def test_distance_examples():
    x = np.array([[1.0], [0.0]])
    B = np.array([[1.0], [1.0]]) / np.sqrt(2)
    d, _ = distance_to_subspace(x, B, 2, 2)
    assert d == pytest.approx(np.sqrt(2) / 2, rel=1e-6)
    d, _ = distance_to_subspace(x, np.array([[1.0], [0.0]]), 3, 2)
    assert d == pytest.approx(0, abs=1e-9)
    d, _ = distance_to_subspace(x, np.zeros((2, 0)), 3, 2)
    assert d == pytest.approx(mixed_norm(x, 3, 2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([1.5, 2.0, 3.0]), st.sampled_from([1.5, 2.0, 4.0]))
def test_distance_is_minimal_over_perturbations(seed, p, q):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3))
    B = np.linalg.qr(rng.standard_normal((6, 2)))[0]
    d, y = distance_to_subspace(x, B, p, q)
    assert mixed_norm(x - y, p, q) == pytest.approx(d, rel=1e-9)
    for _ in range(20):
        y2 = y + (B @ (1e-3 * rng.standard_normal(2))).reshape(2, 3)
        assert mixed_norm(x - y2, p, q) >= d - 1e-9


def test_points_estimator_trivial_cases():
    v = np.array([[[1.0], [2.0]]])
    pts = np.concatenate([v, -v])
    est = kolmogorov_width_points(pts, 1, 2, 2, FAST)
    assert est.value == pytest.approx(0, abs=1e-6)
    assert kolmogorov_width_points(pts, 2, 2, 2, FAST).value == 0.0
    assert kolmogorov_width_points(pts, 0, 2, 2, FAST).value == pytest.approx(np.sqrt(5))


def test_cross_polytope_points():
    V = gluskin_vertices(2, 2, 1, 1).vertices
    est = kolmogorov_width_points(V, 1, 2, 2, FAST)
    assert est.value == pytest.approx(np.sqrt(0.75), rel=0.01)
    assert reevaluate(est) == pytest.approx(est.value, abs=1e-9)


def test_ball_estimator_cases():
    s = SpaceSpec(2, 2, 2, 2)
    assert kolmogorov_width_ball(s, s, 4, FAST).value == 0.0
    assert kolmogorov_width_ball(s, s, 0, FAST).value == pytest.approx(1.0, rel=1e-6)
    est = kolmogorov_width_ball(s, s, 2, FAST)
    assert est.value == pytest.approx(1.0, rel=1e-3)
    assert reevaluate(est) == pytest.approx(est.value, abs=1e-9)
    with pytest.raises(ValueError):
        kolmogorov_width_ball(SpaceSpec(2, 2, 2, 2), SpaceSpec(2, 3, 2, 2), 1)
    with pytest.raises(ValueError):
        kolmogorov_width_ball(SpaceSpec(9, 8, 2, 2), SpaceSpec(9, 8, 2, 2), 1)


def test_sweep_monotone_and_deterministic():
    src, dst = SpaceSpec(2, 2, 2, 2), SpaceSpec(2, 2, 4, 4)
    a = kolmogorov_sweep(src, dst, [0, 1, 2, 3], FAST)
    b = kolmogorov_sweep(src, dst, [0, 1, 2, 3], FAST)
    va = [e.value for e in a]
    assert va == [e.value for e in b]
    assert all(y <= x + 1e-12 for x, y in zip(va, va[1:]))


def test_linear_identity_spectrum():
    s = SpaceSpec(2, 2, 2, 2)
    assert linear_width_estimate(s, s, 4, FAST).value == 0.0
    est = linear_width_estimate(s, s, 1, FAST)
    assert est.value == pytest.approx(1.0, rel=1e-3)
    assert linear_width_estimate(s, s, 0, FAST).value == pytest.approx(1.0, rel=1e-6)


def test_operator_norm_identity_radius():
    src, dst = SpaceSpec(2, 2, 2, 2), SpaceSpec(2, 2, 4, 4)
    v, x, _ = operator_norm(np.eye(4), src, dst, FAST)
    assert v == pytest.approx(1.0, rel=1e-6)
    v, x, _ = operator_norm(np.eye(4), dst, src, FAST)
    assert v == pytest.approx(2 ** 0.5, rel=1e-4)


def test_duality_gap_small():
    s, d = SpaceSpec(2, 2, 2, 2), SpaceSpec(2, 2, 2, 2)
    assert duality_gap(s, d, 1, FAST) <= 1e-3
    assert duality_gap(SpaceSpec(2, 2, 1.5, 1.5), SpaceSpec(2, 2, 3, 3), 0, FAST) <= 1e-4


@pytest.mark.parametrize("m,k", [(1, 1), (2, 3), (3, 2), (3, 3)])
def test_gluskin_counts(m, k):
    for r in range(1, m + 1):
        for l in range(1, k + 1):
            P = gluskin_vertices(m, k, r, l)
            assert len(P.vertices) == comb(m, r) * comb(k, l) * 2 ** (r + l - 1)
            flat = {tuple(v.ravel()) for v in P.vertices}
            assert len(flat) == len(P.vertices)
            assert all(tuple(-v.ravel()) in flat for v in P.vertices)


def test_gluskin_small_cases():
    P = gluskin_vertices(2, 2, 1, 1)
    flat = P.vertices.reshape(len(P.vertices), 4)
    assert len(flat) == 8
    assert sorted(map(tuple, flat.tolist())) == sorted(map(tuple, np.concatenate([np.eye(4), -np.eye(4)]).tolist()))
    assert len(gluskin_vertices(3, 2, 3, 2).vertices) == 2 ** 4
    with pytest.raises(ValueError):
        gluskin_vertices(2, 2, 3, 1)
    with pytest.raises(ValueError):
        gluskin_vertices(4, 4, 2, 2, budget=10)


def test_averaged_lower_bound():
    P = gluskin_vertices(3, 3, 2, 2)
    empty = np.zeros((9, 0))
    v = averaged_lower_bound(P, empty, 3, 4, 50)
    assert v == pytest.approx((2 ** (4 / 3) * 2) ** (1 / 4))
    full = np.eye(9)
    assert averaged_lower_bound(P, full, 3, 4, 20) == pytest.approx(0, abs=1e-9)
    B = np.linalg.qr(np.random.default_rng(0).standard_normal((9, 3)))[0]
    d, _ = distances(P.vertices, B, 3, 4)
    assert averaged_lower_bound(P, B, 3, 4, 100) <= d.max() + 1e-12
    with pytest.raises(ValueError):
        averaged_lower_bound(P, B, 3, 4, 0)


def test_subadditivity():
    assert subadditivity_check([(1, 0.5)], (1, 0.5)) == 0
    assert subadditivity_check([(1, 0.5), (1, 0.25)], (2, 0.0)) == 0.75
    with pytest.raises(ValueError):
        subadditivity_check([(1, 0.5)], (2, 0.5))
    # two 2 x 1 blocks of a 2 x 2 problem: n = 1 + 1 against the joint n = 2
    blk = SpaceSpec(2, 1, 2, 2)
    joint = SpaceSpec(2, 2, 2, 2)
    parts = [(1, kolmogorov_width_ball(blk, SpaceSpec(2, 1, 4, 4), 1, FAST).value)] * 2
    j = kolmogorov_width_ball(joint, SpaceSpec(2, 2, 4, 4), 2, FAST).value
    assert subadditivity_check(parts, (2, j)) >= -1e-6
