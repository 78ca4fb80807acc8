import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from widths_lab import discretization_cover as dc
from widths_lab.besov_embedding import EmbeddingParams, ParamsError, RhoSpec, read_params_file, theta_table

PARAMS = "params"


def test_annulus_card_matches_enumeration():
    for d in (1, 2, 3):
        for e in range(0, 6 if d < 3 else 4):
            assert dc.annulus_card(e, d) == dc.annulus_card_brute(e, d)
    assert dc.annulus_card(-1, 2) == 0
    assert dc.annulus_card(0, 1) == 2


def test_eps_zero_counts_n2_d1():
    A = dc.build_cover(2, 1, 0, 0, 0)
    for f in A.families:
        if f.tag == "N1":
            e = 2 + f.l - f.j
            assert f.shift == f.j
            assert f.m_dim == dc.annulus_card(e, 1)
            assert f.k_dim == 2 ** f.j


def test_threshold_j():
    assert dc.threshold_j(2, 1, 0, F(3, 2), 4) == 2
    assert dc.threshold_j(2, 1, 1, F(3, 2), 4) == 1
    assert dc.threshold_j(3, 2, 0, 2, 2) == 0


def test_build_cover_preconditions():
    with pytest.raises(ValueError):
        dc.build_cover(2, 1, -0.1, 0, 0)
    with pytest.raises(ValueError):
        dc.build_cover(2, 1, 0.25, 1, 0)
    with pytest.raises(ValueError):
        dc.build_cover(2, 1, 0.25, 0, 2)
    with pytest.raises(OverflowError):
        dc.build_cover(3, 1, 0.25, 0, 0, budget=10)


def test_level_zero_cover():
    A = dc.build_cover(0, 1, 0.25, 0, 0)
    assert A.n == 1
    assert dc.verify_cover(A).ok


def test_membership_spot_checks():
    A = dc.build_cover(2, 1, F(1, 4), 0, 0)
    rng = np.random.default_rng(0)
    for f in A.families:
        if f.tag != "N1" or f.l > 3:
            continue
        for t in range(2 ** f.j, 2 ** (f.j + 1)):
            nu = 2 + t + f.l - f.shift
            e = nu - t
            if e < 0:
                continue
            M = int(rng.integers(2 ** e // 2 + 1, 2 ** e + 1)) if e > 0 else 1
            assert f.member(nu, [M])
            assert not A.lookup("N1", f.j, f.l + 1).member(nu, [M])
    n4 = A.lookup("N4")
    assert all(n4.member(nu, [0]) for nu in range(A.n))
    assert not n4.member(A.n, [0])


def test_deep_cube_in_n3():
    A = dc.build_cover(1, 1, 0, 0, 0, q1=F(3, 2), q2=4)
    cut = 2 ** (math.floor(A.j_s) + 1)
    n3 = A.lookup("N3")
    for nu in range(cut, cut + 10):
        for M in (1, 2 ** (nu - cut)):
            assert n3.member(nu, [M])
        assert not n3.member(nu, [2 ** (nu - cut) + 1])


@pytest.mark.parametrize("N,d", [(2, 1), (3, 1), (1, 2), (2, 2)])
@pytest.mark.parametrize("eps", [0, F(1, 4)])
@pytest.mark.parametrize("s", [0, 1])
def test_cover_has_no_gaps(N, d, eps, s):
    A = dc.build_cover(N, d, eps, 0, s, q1=F(3, 2), q2=4)
    rep = dc.verify_cover(A, samples=300, seed=1)
    assert rep.ok, rep.gaps[:5]


def test_cover_top_anchor_and_gap_detection():
    A = dc.build_cover(2, 1, F(1, 4), 2, 0)
    assert dc.verify_cover(A, samples=200).ok
    broken = dc.CoverAtlas(A.N_level, A.d, A.eps, A.j_star, A.s, A.j_s, A.nu_cap,
                           tuple(f for f in A.families if f.tag != "N4"),
                           {k: v for k, v in A.index.items() if k[0] != "N4"})
    rep = dc.verify_cover(broken, samples=10)
    assert not rep.ok and all(m == (0,) for _, m in rep.gaps)
    with pytest.raises(ValueError):
        dc.verify_cover(A, nu_cap=2 ** 16 + 1)


def test_s1_switches_threshold():
    a = dc.build_cover(2, 1, F(1, 4), 0, 0, q1=F(3, 2), q2=4)
    b = dc.build_cover(2, 1, F(1, 4), 0, 1, q1=F(3, 2), q2=4)
    assert (a.j_s, b.j_s) == (2, 1)
    assert sum(f.tag == "N5" for f in a.families) == 2
    assert sum(f.tag == "N5" for f in b.families) == 1


def test_rank_budget_ratio():
    eps0 = [dc.rank_budget_ratio(dc.build_cover(N, 1, 0, 0, 0)) for N in range(2, 7)]
    assert eps0 == [2, 3, 4, 5, 6]
    damped = [dc.rank_budget_ratio(dc.build_cover(N, 1, F(1, 2), 0, 0)) for N in range(2, 7)]
    assert max(damped) / min(damped) <= 8


def test_dump_format():
    A = dc.build_cover(1, 1, F(1, 4), 0, 0)
    lines = dc.dump_atlas(A).splitlines()
    assert len(lines) == len(A.families)
    tags = {ln.split()[0] for ln in lines}
    assert tags == {"N1", "N2", "N3", "N4", "N6"}
    for ln in lines:
        tag, j, l, md, kd, w, mu = ln.split()
        assert float(w) > 0 and int(mu) >= 0
        if tag in ("N3", "N6"):
            assert (md, kd) == ("-1", "-1")


def test_weights_and_budgets_with_params():
    P, _ = read_params_file(f"{PARAMS}/alpha3.params")
    A = dc.build_cover(2, 1, F(1, 4), 0, 0, params=P)
    n = A.n
    fams = {(f.tag, f.j, f.l): f for f in A.families}
    f = fams[("N1", 0, 0)]
    assert f.weight_factor == pytest.approx(2.0 ** (-1.75 * 2))
    assert f.mu == n  # the anchor family gets the full budget
    assert fams[("N1", 0, -1)].mu == fams[("N1", 0, -1)].rank
    assert all(f.mu <= n for f in A.families if f.tag in ("N1", "N2") and f.l >= 0)
    assert fams[("N4", 0, 0)].mu == n


# ------------------------------------------------------------- corners


def _alpha(a):
    return EmbeddingParams(d=1, s1=2, s2=0, p1=2, q1=2, p2=4, q2=4, beta_g=F(7, 4), beta_v=0,
                           alpha_g=a, alpha_v=0, gamma_g=F(7, 4) + 1, gamma_v=0)


def test_corner_examples():
    j, l, e, label = dc.corner_argmax(_alpha(3), "F1", 2 ** 8)
    assert (j, l, e) == (0, 0, -2)
    fam, j, l, e, label = dc.dominant_corner(_alpha(F(1, 10)), 2 ** 8)
    assert (fam, e) == ("SIGMA_STAR", F(-1, 5))
    assert j == 8
    with pytest.raises(ValueError):
        dc.corner_argmax(_alpha(3), "F1", 12)


def _random_params(rnd):
    vals = [F(3, 2), F(2), F(5, 2), F(3), F(4), F(6), F(5, 4), F(8, 5)]
    while True:
        d = rnd.choice([1, 2, 3])
        p1, p2 = sorted([rnd.choice(vals), rnd.choice(vals)])
        q1, q2 = sorted([rnd.choice(vals), rnd.choice(vals)])
        if p2 < 2 or q2 < 2 or p2 == q2 == 2:
            continue
        delta, alpha = F(rnd.randint(1, 40), 8), F(rnd.randint(1, 40), 8)
        s1 = delta + d * (1 / p1 - 1 / p2) + F(rnd.randint(0, 4), 4)
        s2 = s1 - delta - d * (1 / p1 - 1 / p2)
        try:
            return EmbeddingParams(d=d, s1=s1, s2=s2, p1=p1, q1=q1, p2=p2, q2=q2, beta_g=delta, beta_v=0,
                                   alpha_g=alpha, alpha_v=0, gamma_g=delta + 1, gamma_v=0)
        except ParamsError:
            continue


def test_corner_identity_random():
    rnd = random.Random(7)
    for _ in range(150):
        P = _random_params(rnd)
        table, _ = theta_table(P)
        low = min(table[j][0] for j in (1, 2, 3, 4))
        top = max(e for fam in ("F1", "F2", "SIGMA_STAR") for *_, e in dc.corner_table(P, fam))
        assert top == -low


def test_mixed_corner_dominated():
    rnd = random.Random(3)
    for _ in range(100):
        P = _random_params(rnd)
        dd = P.delta / P.d
        mixed = P.p2 * dd / 2 + P.alpha - P.p2 * dd / P.q2
        assert mixed >= min(P.alpha * P.q2 / 2, P.p2 * dd / 2)


def test_piecewise_continuity():
    rnd = random.Random(11)
    for _ in range(40):
        P = _random_params(rnd)
        for fam in ("F1", "F2"):
            sp = dc.step5_spec(P, fam)
            assert sp.psi(sp.j_coef, F(sp.l_coef)) == 0


# ---------------------------------------------------------- summation


def _single(lam=-1, mu=-1, cap=None):
    return dc.PiecewiseAffineSpec((F(0),), (F(0),), (F(lam),), (F(mu),), (F(0),), F(1), False, F(0), eta_cap=cap)


def test_osn_trivial_examples():
    one = RhoSpec()
    total = dc.osn_sum(_single(), one, 2 ** 10, 0)
    assert 3.9 < total < 4
    assert dc.osn_sum(_single(0, 0, F(1, 2)), one, 2 ** 10, 0) == 11 * 5
    mx, slope, _ = dc.osn_bound_check(_single(), one, [2 ** k for k in range(4, 13)], 0)
    assert abs(slope) < 0.05


def test_osn_preconditions():
    with pytest.raises(ValueError, match="mu_m < 0"):
        _single(-1, 0)
    with pytest.raises(ValueError, match="vanish"):
        dc.PiecewiseAffineSpec((F(0),), (F(0),), (F(-1),), (F(-1),), (F(1),), F(1), False, F(0))
    with pytest.raises(ValueError, match="continuous"):
        dc.PiecewiseAffineSpec((F(0), F(0)), (F(0), F(1)), (F(-1), F(-1)), (F(-1), F(-2)), (F(0), F(0)),
                               F(1), False, F(0))


@pytest.mark.parametrize("name", ["alpha3", "alpha0.1"])
def test_step5_specs(name):
    P, _ = read_params_file(f"{PARAMS}/{name}.params")
    sp = dc.step5_spec(P, "F1")
    assert sp.gamma() > 0
    grid = [2 ** k for k in range(4, 13)]
    for rho in (P.rho, RhoSpec(1, 0)):
        mx, slope, r = dc.osn_bound_check(sp, rho, grid, 0)
        assert abs(slope) < 0.05 and r.max() / r.min() <= 16
    rng = np.random.default_rng(0)
    lam, mu, nu = dc.perturb_spec(sp, rng, F(1, 100))
    assert abs(sum(l * float(sp.j_coef) for l in lam[:1]) + mu[0] * float(sp.l_coef) + nu[0]) < 1e-12
    mx, slope, r = dc.osn_bound_check(sp, P.rho, grid, 0, lam=lam, mu=mu, nu=nu)
    assert abs(slope) < 0.05


def test_eps0_alpha3():
    P, _ = read_params_file(f"{PARAMS}/alpha3.params")
    sp = dc.step5_spec(P, "F1")
    assert sp.gamma() == F(5, 4)
    assert sp.c_bound() == 1
    assert dc.eps0(sp) == F(5, 32)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_perturbation_keeps_anchor(seed):
    P, _ = read_params_file(f"{PARAMS}/alpha0.1.params")
    sp = dc.step5_spec(P, "F1")
    lam, mu, nu = dc.perturb_spec(sp, np.random.default_rng(seed), dc.eps0(sp))
    ja, la = float(sp.j_coef), float(sp.l_coef)
    s = sp.piece_of(sp.j_coef, F(sp.l_coef))
    assert abs(lam[s] * ja + mu[s] * la + nu[s]) < 1e-12
