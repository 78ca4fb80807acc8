"""Dyadic covering of the index set {(nu, m): 2^-nu m in [-1/2, 1/2]^d} by blocks on
which the discretized embedding is a scaled identity between mixed-norm balls,
plus the corner selection and the piecewise-affine summation bound used to
add the block widths up.

Membership predicates use exact integer arithmetic: for M = |m|_inf >= 1 the
annulus index is t = nu - ceil(log2 M), i.e. 2^-(t+1) < 2^-nu M <= 2^-t.
"""
from dataclasses import dataclass, field
from fractions import Fraction
import math
import random

import numpy as np

from .besov_embedding import RhoSpec, WindowViolation
from .mixed_norm_core import dual_exponent, lambda_vec

__all__ = [
    "CoverFamily",
    "CoverAtlas",
    "CoverReport",
    "build_cover",
    "annulus_card",
    "annulus_card_brute",
    "card_order",
    "rank_budget_ratio",
    "verify_cover",
    "default_nu_cap",
    "dump_atlas",
    "threshold_j",
    "corner_table",
    "corner_argmax",
    "dominant_corner",
    "PiecewiseAffineSpec",
    "osn_sum",
    "osn_bound_check",
    "eps0",
    "perturb_spec",
    "step5_spec",
]

FAMILY_BUDGET = 200_000
MATERIALIZE_NU = 512


def _ceil_log2(M):
    return (int(M) - 1).bit_length()


def _floor_frac(x):
    return math.floor(Fraction(x))


def threshold_j(N_level, d, s, q1=2, q2=2):
    """j_0(N) (s = 0) or j_1(N) (s = 1): N d max(r/2 - 1, 0) with r = q2 or min(q2, q1')."""
    q1, q2 = Fraction(q1), Fraction(q2)
    r = q2 if int(s) == 0 else min(q2, dual_exponent(q1))
    return Fraction(N_level * d) * max(r / 2 - 1, Fraction(0))


def annulus_card(e, d):
    """Number of m with 2^(e-1) < |m|_inf <= 2^e (zero when e < 0)."""
    if e < 0:
        return 0
    return (2 ** (e + 1) + 1) ** d - (2 * (2 ** (e - 1) if e >= 1 else 0) + 1) ** d


def annulus_card_brute(e, d):
    """The same count by direct enumeration (small e only)."""
    if e < 0:
        return 0
    K = 2 ** e
    axes = np.arange(-K, K + 1)
    grid = np.stack(np.meshgrid(*[axes] * d, indexing="ij")).reshape(d, -1)
    M = np.abs(grid).max(axis=0)
    return int(np.sum((2.0 * M > K) & (M <= K)))


def card_order(N_level, d, j, l, cN):
    """The order value 2^(Nd + ld - j - [c_N(j)] d) of the annulus count."""
    return 2.0 ** (N_level * d + l * d - j - _floor_frac(cN) * d)


@dataclass(frozen=True)
class CoverFamily:
    """One block of the covering.

    m_dim and k_dim are the inner and outer sizes of the mixed-norm block;
    infinite families carry -1 in both.
    """

    tag: str
    j: int
    l: int
    m_dim: int
    k_dim: int
    weight_factor: float
    mu: int
    N_level: int
    d: int
    shift: int = 0
    cut: int = 0

    def member(self, nu, m):
        nu = int(nu)
        M = max((abs(int(x)) for x in np.atleast_1d(m)), default=0)
        if nu < 0 or (M > 0 and 2 * M > 2 ** nu):
            return False
        Nd = self.N_level * self.d
        if self.tag == "N4":
            return M == 0 and nu < 2 ** Nd
        if self.tag == "N5":
            return M == 0 and 2 ** (self.j + Nd) <= nu < 2 ** (self.j + 1 + Nd)
        if self.tag == "N6":
            return M == 0 and nu >= 2 ** self.cut
        if M == 0:
            return False
        t = nu - _ceil_log2(M)
        if self.tag == "N1":
            return 2 ** self.j <= t < 2 ** (self.j + 1) and nu == self.N_level + t + self.l - self.shift
        if self.tag == "N2":
            return 2 ** (self.j + Nd) <= t < 2 ** (self.j + 1 + Nd) and nu == t + self.l
        if self.tag == "N3":
            # 2^-nu M <= 2^-(2^cut), i.e. M <= 2^(nu - 2^cut)
            return nu - 2 ** self.cut >= 0 and M <= 2 ** (nu - 2 ** self.cut)
        raise ValueError(f"unknown family tag {self.tag}")

    @property
    def rank(self):
        return -1 if self.m_dim < 0 else self.m_dim * self.k_dim


@dataclass(frozen=True)
class CoverAtlas:
    N_level: int
    d: int
    eps: Fraction
    j_star: int
    s: int
    j_s: Fraction
    nu_cap: int
    families: tuple
    index: dict = field(default_factory=dict, compare=False, repr=False)
    make: object = field(default=None, compare=False, repr=False)

    @property
    def n(self):
        return 2 ** (self.N_level * self.d)

    def c_N(self, j):
        return self.eps * abs(int(j) - self.j_star)

    def lookup(self, tag, j=0, l=0):
        """The family with this label; N1/N2 families above the materialized range are built on demand."""
        f = self.index.get((tag, j, l))
        if f is None and self.make is not None:
            f = self.make(tag, j, l)
        return f


def default_nu_cap(N_level, d, j_s):
    return min(2 ** (N_level * d + math.floor(j_s)) + 64, 2 ** 16)


def _weights(params):
    if params is None:
        return Fraction(0), Fraction(0), RhoSpec()
    return params.delta, params.alpha, params.rho


def _wf(log2_value, rho_arg, rho):
    return float(2.0 ** float(log2_value) * float(rho(rho_arg)))


def build_cover(N_level, d, eps, j_star, s, params=None, q1=None, q2=None, nu_cap=None,
                budget=FAMILY_BUDGET, materialize_nu=MATERIALIZE_NU):
    """The six kinds of families covering all (nu, m) with nu <= nu_cap.

    c_N(j) = eps |j - j_star| with j_star in {0, N d}. Exponents q1, q2 (for
    the thresholds j_0, j_1) come from ``params`` when given, else default
    to 2. Weight factors need ``params`` (otherwise all are 1); rank budgets
    follow the Step-4/5 rules when ``params`` is in one of those windows and
    are zero otherwise. Families whose smallest nu exceeds
    ``materialize_nu`` are not listed but are built on lookup.
    """
    N_level, d, s = int(N_level), int(d), int(s)
    eps = Fraction(eps)
    if N_level < 0 or d < 1:
        raise ValueError(f"need N_level >= 0 and d >= 1, got N_level={N_level}, d={d}")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if s not in (0, 1):
        raise ValueError(f"s must be 0 or 1, got {s}")
    Nd = N_level * d
    if int(j_star) not in (0, Nd):
        raise ValueError(f"j_star must be 0 or N d = {Nd}, got {j_star}")
    j_star = int(j_star)
    if params is not None:
        q1 = params.q1 if q1 is None else q1
        q2 = params.q2 if q2 is None else q2
    q1 = Fraction(2) if q1 is None else Fraction(q1)
    q2 = Fraction(2) if q2 is None else Fraction(q2)
    j_s = threshold_j(N_level, d, s, q1, q2)
    js = math.floor(j_s)
    nu_cap = default_nu_cap(N_level, d, j_s) if nu_cap is None else int(nu_cap)
    delta, alpha, rho = _weights(params)
    budgets = _Budgets(params, N_level, d, eps, j_star)
    n = 2 ** Nd

    top = min(nu_cap, int(materialize_nu))

    def shift_of(j):
        return j // d + _floor_frac(eps * abs(j - j_star))

    def make(tag, j, l):
        if tag == "N1" and 0 <= j <= Nd:
            sh = shift_of(j)
            e = N_level + l - sh
            if e < 0:
                return None
            card = annulus_card(e, d)
            w = _wf(-delta * e - alpha * j, 2 ** j, rho)
            mu = card * 2 ** j if l < 0 else budgets.mu1(j, l)
            return CoverFamily("N1", j, l, card, 2 ** j, w, mu, N_level, d, shift=sh)
        if tag == "N2" and 0 <= j <= js and l >= 0:
            card = annulus_card(l, d)
            w = _wf(-delta * l - alpha * (j + Nd), 2 ** (j + Nd), rho)
            return CoverFamily("N2", j, l, card, 2 ** (j + Nd), w, budgets.mu2(j, l), N_level, d)
        return None

    fams = []

    def add(f):
        fams.append(f)
        if len(fams) > budget:
            raise OverflowError(f"more than {budget} families materialized; lower nu_cap")

    for j in range(Nd + 1):
        sh = shift_of(j)
        # the smallest nu in N1(j, l) is 2^j + e, with e = N + l - shift >= 0
        for l in range(sh - N_level, top - 2 ** j - N_level + sh + 1):
            add(make("N1", j, l))
    for j in range(js + 1):
        for l in range(0, max(top - 2 ** (j + Nd), -1) + 1):
            add(make("N2", j, l))
    deep = _wf(-alpha * (j_s + Nd), 2.0 ** float(j_s + Nd), rho)
    add(CoverFamily("N3", 0, 0, -1, -1, deep, 0, N_level, d, cut=js + Nd))
    add(CoverFamily("N4", 0, 0, 1, n, 1.0, n, N_level, d))
    for j in range(js):
        w = _wf(-alpha * (j + Nd), 2 ** (j + Nd), rho)
        add(CoverFamily("N5", j, 0, 1, 2 ** (j + Nd), w, budgets.mu5(j), N_level, d))
    add(CoverFamily("N6", 0, 0, -1, -1, deep, 0, N_level, d, cut=js + Nd))
    index = {(f.tag, f.j, f.l): f for f in fams}
    return CoverAtlas(N_level, d, eps, j_star, s, j_s, nu_cap, tuple(fams), index, make)


class _Budgets:
    """mu budgets: zero in the p2, q2 <= 2 case (and without params), Step-5 rules for p2, q2 >= 2."""

    def __init__(self, params, N_level, d, eps, j_star):
        self.on = params is not None and params.p2 >= 2 and params.q2 >= 2
        self.n = 2 ** (N_level * d)
        self.eps = eps
        if not self.on:
            return
        L = N_level * d
        self.L = L
        self.params = params
        self.b1 = _family_setup(params, "F1")
        self.b2 = _family_setup(params, "F2")
        c1 = corner_argmax(params, "F1", 2 ** L) if L > 0 else None
        c2 = corner_argmax(params, "F2", 2 ** L) if L > 0 else None
        self.c1 = c1
        self.c2 = c2
        lq = Fraction(lambda_vec(params.q1, params.q2))
        j0 = threshold_j(N_level, d, 0, params.q1, params.q2)
        self.j5 = 0 if params.alpha >= lq / params.q2 else j0

    def _mu(self, setup, corner, j, l):
        if corner is None:
            return self.n
        L = self.L
        u = Fraction(j, L)
        if Fraction(l, L) > setup.lbar(u):
            return 0
        jc, lc, _, label = corner
        lhat = setup.lhat(label, u) * L
        sig = _floor_frac(self.eps * abs(j - jc))
        tau = _floor_frac(self.eps * abs(l - lhat))
        return self.n // 2 ** (sig + tau)

    def mu1(self, j, l):
        return self._mu(self.b1, self.c1, j, l) if self.on else 0

    def mu2(self, j, l):
        return self._mu(self.b2, self.c2, j, l) if self.on else 0

    def mu5(self, j):
        if not self.on:
            return 0
        return self.n // 2 ** _floor_frac(self.eps * abs(j - self.j5))


def rank_budget_ratio(atlas):
    """sum over j and l < 0 of |N1(j, l)| divided by n."""
    total = 0
    for j in range(atlas.N_level * atlas.d + 1):
        shift = j // atlas.d + _floor_frac(atlas.c_N(j))
        for l in range(shift - atlas.N_level, 0):
            f = atlas.lookup("N1", j, l)
            total += f.m_dim * f.k_dim
    return total / atlas.n


@dataclass(frozen=True)
class CoverReport:
    checked: int
    gaps: tuple
    exhaustive_upto: int

    @property
    def ok(self):
        return not self.gaps


def _candidates(atlas, nu, M):
    """Families that the exact inversion points to for (nu, M)."""
    Nd = atlas.N_level * atlas.d
    if M == 0:
        out = [atlas.lookup("N4"), atlas.lookup("N6")]
        if nu >= 2 ** Nd:
            out.append(atlas.lookup("N5", nu.bit_length() - 1 - Nd))
        return [f for f in out if f is not None]
    t = nu - _ceil_log2(M)
    out = [atlas.lookup("N3")]
    if t >= 1:
        j = t.bit_length() - 1
        if j <= Nd:
            shift = j // atlas.d + _floor_frac(atlas.c_N(j))
            out.append(atlas.lookup("N1", j, nu - atlas.N_level - t + shift))
        if j >= Nd:
            out.append(atlas.lookup("N2", j - Nd, nu - t))
    return [f for f in out if f is not None]


def _representative(rng, M, d):
    """A random m with |m|_inf = M (object dtype so large M stays exact)."""
    m = [int(rng.integers(-min(M, 2 ** 62), min(M, 2 ** 62) + 1)) for _ in range(d)]
    m[int(rng.integers(d))] = M * (1 if rng.random() < 0.5 else -1)
    return np.array(m, dtype=object)


def verify_cover(atlas, nu_cap=None, samples=2000, seed=0, exhaustive_upto=12):
    """Check that every (nu, m) with 2^-nu m in [-1/2, 1/2]^d, nu <= nu_cap, is in some family.

    Membership only depends on (nu, |m|_inf), so all pairs (nu, M) are
    enumerated for nu <= exhaustive_upto (with a random representative m per
    pair); beyond that (nu, M) is sampled with M log-uniform. A pair not
    matched by the inverted candidates is re-checked against every family
    before being reported as a gap.
    """
    nu_cap = atlas.nu_cap if nu_cap is None else int(nu_cap)
    if nu_cap > 2 ** 16:
        raise ValueError("nu_cap must be <= 2^16")
    rng = np.random.default_rng([int(seed), 5])
    pyrng = random.Random(int(seed))
    pairs = [(nu, M) for nu in range(min(nu_cap, exhaustive_upto) + 1)
             for M in range(0, (2 ** nu) // 2 + 1)]
    if nu_cap > exhaustive_upto:
        nus = rng.integers(exhaustive_upto + 1, nu_cap + 1, size=samples)
        for nu in nus.tolist():
            top = nu - 1
            e = int(rng.integers(0, top + 1))
            M = (2 ** e // 2 + 1 + pyrng.randrange(2 ** e - 2 ** e // 2)) if e > 0 else pyrng.randrange(2)
            pairs.append((nu, M))
    gaps = []
    for nu, M in pairs:
        m = _representative(rng, M, atlas.d) if M else np.zeros(atlas.d, dtype=np.int64)
        if any(f.member(nu, m) for f in _candidates(atlas, nu, M)):
            continue
        if not any(f.member(nu, m) for f in atlas.families):
            gaps.append((nu, tuple(int(x) for x in m)))
    return CoverReport(len(pairs), tuple(gaps), min(nu_cap, exhaustive_upto))


def _fmt(x):
    return f"{float(x):.12g}"


def dump_atlas(atlas):
    """Line-oriented text, one family per line: tag j l m_dim k_dim weight_factor mu."""
    lines = [f"{f.tag} {f.j} {f.l} {f.m_dim} {f.k_dim} {_fmt(f.weight_factor)} {f.mu}" for f in atlas.families]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------- corner selection


@dataclass(frozen=True)
class _Setup:
    """Piecewise exponent of F1 or F2 in units of log2 n: (n, l, j) coefficients per piece."""

    family: str
    case: str
    pieces: tuple
    lbar: object
    ltil: object
    j0: Fraction
    corners: tuple

    def piece_at(self, u, v):
        lb = self.lbar(u)
        lt = self.ltil(u) if self.ltil is not None else None
        if self.family == "F1":
            if self.case == "A":
                return 0 if v <= lb else 2
            if v < lt:
                return 0
            return 1 if v < lb else 2
        if self.case == "A":
            return 0 if v <= lb else 2
        if self.case == "C":
            return 0 if v < lb else 2
        if v < lt:
            return 0
        return 1 if v <= lb else 2

    def exponent(self, u, v):
        a, b, c = self.pieces[self.piece_at(u, v)]
        return a + b * v + c * u

    def lhat(self, label, u):
        if label.endswith("0"):
            return Fraction(0)
        if label.endswith("bar"):
            return self.lbar(u)
        return self.ltil(u)


def _case(P):
    lp, lq = Fraction(lambda_vec(P.p1, P.p2)), Fraction(lambda_vec(P.q1, P.q2))
    if P.p1 <= 2 and P.q1 <= 2:
        return "A", lp, lq
    if lp <= lq and lp < 1:
        return "B", lp, lq
    return "C", lp, lq


def _family_setup(P, family):
    if not (P.p2 >= 2 and P.q2 >= 2):
        raise WindowViolation(f"window violation: need p2 >= 2 and q2 >= 2, got p2={P.p2}, q2={P.q2}")
    for name in ("p1", "q1", "p2", "q2", "s1", "s2", "alpha_g", "alpha_v"):
        if not isinstance(getattr(P, name), Fraction):
            raise TypeError("corner selection needs exact (rational) parameters")
    d, dl, a = Fraction(P.d), P.delta, P.alpha
    p1, q1, p2, q2 = P.p1, P.q1, P.p2, P.q2
    case, lp, lq = _case(P)
    half = Fraction(1, 2)
    j0 = max(q2 / 2 - 1, Fraction(0))
    if family == "F1":
        lbar = lambda u: (p2 / 2 - 1) / d + u * (1 - p2 / q2) / d
        base = (-dl / d, -dl, -a + dl / d)
        if case == "A":
            pieces = ((-dl / d + 1 / p2 - half, -dl + d / p2, -a + dl / d - 1 / p2 + 1 / q2), None, base)
            ltil = None
            corners = (("00", 0, 0), ("10", 1, 0), ("0bar", 0, "bar"), ("1bar", 1, "bar"))
        elif case == "B":
            pieces = ((-dl / d - 1 / p1 + 1 / p2, -dl + d / p2 - d / p1 + lq * d / 2,
                       -a + dl / d - 1 / p2 + 1 / p1 + lq / q2 - lq / 2),
                      (-dl / d - lp / 2 + lp / p2, -dl + lp * d / p2, -a + dl / d - lp / p2 + lp / q2),
                      base)
            ltil = lambda u: u * (1 - 2 / q2) / d
            corners = (("00", 0, 0), ("10", 1, 0), ("0bar", 0, "bar"), ("1bar", 1, "bar"), ("1til", 1, "til"))
        else:
            pieces = ((-dl / d - lp / 2 + lp / p2, -dl + lp * d / p2,
                       -a + dl / d + lp / 2 - lp / p2 + 1 / q2 - 1 / q1),
                      (-dl / d - lq / 2 + lq / p2, -dl + lq * d / p2, -a + dl / d - lq / p2 + lq / q2),
                      base)
            ltil = lambda u: (1 - u) * (p2 / 2 - 1) / d
            corners = (("00", 0, 0), ("10", 1, 0), ("0bar", 0, "bar"), ("1bar", 1, "bar"))
        return _Setup("F1", case, pieces, lbar, ltil, j0, corners)
    if family == "F2":
        lbar = lambda u: p2 * (half - 1 / q2) / d - p2 * u / (q2 * d)
        base = (-a, -dl, -a)
        if case == "A":
            pieces = ((-a + 1 / q2 - half, -dl + d / p2, -a + 1 / q2), None, base)
            ltil = None
            corners = (("00", 0, 0), ("0bar", 0, "bar"), ("j00", j0, 0))
        elif case == "B":
            pieces = ((-a - lq / 2 + lq / q2, -dl + d / p2 - d / p1 + lq * d / 2, -a + lq / q2),
                      (-a - lp / 2 + lp / q2, -dl + lp * d / p2, -a + lp / q2),
                      base)
            ltil = lambda u: (1 - 2 / q2) / d - 2 * u / (q2 * d)
            corners = (("00", 0, 0), ("0bar", 0, "bar"), ("0til", 0, "til"), ("j00", j0, 0))
        else:
            pieces = ((-a - 1 / q1 + 1 / q2, -dl + lq * d / p2, -a + lq / q2), None, base)
            ltil = None
            corners = (("00", 0, 0), ("0bar", 0, "bar"), ("j00", j0, 0))
        return _Setup("F2", case, pieces, lbar, ltil, j0, corners)
    raise ValueError(f"unknown family {family}")


def _log2_exact(n):
    n = int(n)
    if n < 2 or n & (n - 1):
        raise ValueError(f"n must be a power of two >= 2, got {n}")
    return n.bit_length() - 1


def corner_table(params, family):
    """[(label, u, v, exponent)] with j = u log2 n, l = v log2 n and the value ~ n^exponent."""
    P = params
    if family == "SIGMA_STAR":
        if not (P.p2 >= 2 and P.q2 >= 2):
            raise WindowViolation(f"window violation: need p2 >= 2 and q2 >= 2, got p2={P.p2}, q2={P.q2}")
        lq = Fraction(lambda_vec(P.q1, P.q2))
        j0 = max(P.q2 / 2 - 1, Fraction(0))
        base = -P.alpha + lq / P.q2 - lq / 2
        return [("00", Fraction(0), Fraction(0), base),
                ("j00", j0, Fraction(0), base + j0 * (-P.alpha + lq / P.q2))]
    st = _family_setup(P, family)
    out = []
    for label, u, v in st.corners:
        u = Fraction(u)
        v = st.lbar(u) if v == "bar" else st.ltil(u) if v == "til" else Fraction(v)
        out.append((label, u, v, st.exponent(u, v)))
    return out


def corner_argmax(params, family, n):
    """(j, l, exponent, label) of the largest corner of the family at n = 2^L (first on ties)."""
    L = _log2_exact(n)
    best = None
    for label, u, v, e in corner_table(params, family):
        if best is None or e > best[3]:
            best = (label, u, v, e)
    label, u, v, e = best
    return (u * L, v * L, e, label)


def dominant_corner(params, n):
    """The largest corner over F1, F2 and the diagonal sum; ties go to the later family."""
    best = None
    for fam in ("F1", "F2", "SIGMA_STAR"):
        j, l, e, label = corner_argmax(params, fam, n)
        if best is None or e >= best[3]:
            best = (fam, j, l, e, label)
    return best


# ------------------------------------------------- piecewise-affine sums


@dataclass(frozen=True)
class PiecewiseAffineSpec:
    """Pieces E_s = {phi_s(xi) <= eta < phi_{s+1}(xi), 0 <= xi <= N_n} with psi affine on each.

    With L = log2 n: phi_s(xi) = slopes[s] xi + beta[s] L, psi = lam[s] xi +
    mu[s] eta + nu[s] L, N_n = n_coef L, and the anchor is (j*, l*) with
    j* = 0 or N_n (``anchor_top``) and l* = l_coef L. ``eta_cap`` (in units
    of L) truncates the last piece; without it mu[-1] < 0 is required.
    """

    slopes: tuple
    beta: tuple
    lam: tuple
    mu: tuple
    nu: tuple
    n_coef: Fraction
    anchor_top: bool
    l_coef: Fraction
    eta_cap: Fraction = None

    def __post_init__(self):
        m = len(self.slopes)
        if not (len(self.beta) == len(self.lam) == len(self.mu) == len(self.nu) == m) or m == 0:
            raise ValueError("all coefficient tuples must have the same positive length")
        if self.eta_cap is None and not self.mu[-1] < 0:
            raise ValueError(f"need mu_m < 0 for the unbounded top piece, got {self.mu[-1]}")
        for xi in (Fraction(0), Fraction(self.n_coef)):
            vals = [a * xi + b for a, b in zip(self.slopes, self.beta)]
            if any(x > y for x, y in zip(vals, vals[1:])):
                raise ValueError("domain violation: boundary ordering broken on [0, N_n]")
        for s in range(m - 1):
            a, b = self.slopes[s + 1], self.beta[s + 1]
            if (self.lam[s] + self.mu[s] * a != self.lam[s + 1] + self.mu[s + 1] * a
                    or self.mu[s] * b + self.nu[s] != self.mu[s + 1] * b + self.nu[s + 1]):
                raise ValueError(f"psi is not continuous across boundary {s + 2}")
        ja = self.j_coef
        s = self.piece_of(ja, self.l_coef)
        if self.lam[s] * ja + self.mu[s] * self.l_coef + self.nu[s] != 0:
            raise ValueError("psi must vanish at the anchor")

    @property
    def j_coef(self):
        return Fraction(self.n_coef) if self.anchor_top else Fraction(0)

    def piece_of(self, xi, eta):
        s = 0
        for k in range(1, len(self.slopes)):
            if eta >= self.slopes[k] * xi + self.beta[k]:
                s = k
        return s

    def psi(self, xi, eta):
        s = self.piece_of(xi, eta)
        return self.lam[s] * xi + self.mu[s] * eta + self.nu[s]

    def vertices(self):
        out = []
        for xi in (Fraction(0), Fraction(self.n_coef)):
            for a, b in zip(self.slopes, self.beta):
                out.append((xi, a * xi + b))
        return out

    def gamma(self):
        """Largest gamma with psi <= -gamma L at all vertices other than the anchor."""
        anchor = (self.j_coef, Fraction(self.l_coef))
        vals = [self.psi(*v) for v in self.vertices() if v != anchor]
        return -max(vals) if vals else Fraction(1)

    def c_bound(self):
        vals = [abs(Fraction(self.n_coef))]
        for xi in (Fraction(0), Fraction(self.n_coef)):
            vals += [abs(a * xi + b) for a, b in zip(self.slopes, self.beta)]
        return max(vals)


def osn_sum(spec, rho, n, N_tilde, lam=None, mu=None, nu=None):
    """Sum over lattice points (j, l) of E^n of 2^psi(j, l) rho(2^(j + N_tilde)).

    ``lam``, ``mu`` and ``nu`` replace the piece coefficients (a perturbed
    psi on the same pieces); the unbounded top piece is summed in closed form.
    """
    L = math.log2(n)
    lam = spec.lam if lam is None else lam
    mu = spec.mu if mu is None else mu
    nu = spec.nu if nu is None else nu
    m = len(spec.slopes)
    if spec.eta_cap is None and not mu[-1] < 0:
        raise ValueError("the top piece needs a negative eta coefficient")
    Nn = math.floor(float(spec.n_coef) * L + 1e-9)
    total = 0.0
    for j in range(Nn + 1):
        bounds = [math.ceil(float(a) * j + float(b) * L - 1e-9) for a, b in zip(spec.slopes, spec.beta)]
        top = math.ceil(float(spec.eta_cap) * L - 1e-9) if spec.eta_cap is not None else None
        bounds.append(top)
        rj = float(rho(2.0 ** (j + N_tilde)))
        for s in range(m):
            lo, hi = bounds[s], bounds[s + 1]
            lo = max(lo, bounds[0])
            a, b, c = float(lam[s]), float(mu[s]), float(nu[s]) * L
            if hi is None:
                total += 2.0 ** (a * j + b * lo + c) / (1 - 2.0 ** b) * rj
            elif hi > lo:
                ls = np.arange(lo, hi, dtype=float)
                total += float(np.sum(2.0 ** (a * j + b * ls + c))) * rj
    return total


def osn_bound_check(spec, rho, n_grid, N_tilde=None, **coef):
    """Ratios osn_sum / rho(2^(j* + N_tilde)) over n and the slope of log ratio vs log log2 n."""
    ratios = []
    logs = []
    for n in n_grid:
        L = math.log2(n)
        Nt = 0 if N_tilde is None else int(N_tilde(n)) if callable(N_tilde) else int(N_tilde)
        jstar = math.floor(float(spec.j_coef) * L + 1e-9)
        r = osn_sum(spec, rho, n, Nt, **coef) / float(rho(2.0 ** (jstar + Nt)))
        ratios.append(r)
        logs.append(math.log(L))
    ratios = np.array(ratios)
    slope = float(np.polyfit(np.array(logs), np.log(ratios), 1)[0]) if len(ratios) > 1 else 0.0
    return float(ratios.max()), slope, ratios


def _t_index(spec, s, s_lo, s_hi, mus):
    if s == s_hi:
        return s_hi
    if s == s_lo - 1:
        return s_lo
    return s if mus[s] <= 0 else s + 1


def eps0(spec, c=None, gamma=None):
    """The perturbation radius of the summation lemma for this spec.

    S is the set of pieces whose lower boundary passes through the anchor;
    t(s) is chosen with the unperturbed eta coefficients.
    """
    c = spec.c_bound() if c is None else Fraction(c)
    gamma = spec.gamma() if gamma is None else Fraction(gamma)
    ja, la = spec.j_coef, Fraction(spec.l_coef)
    m = len(spec.slopes)
    S = [s for s in range(m) if spec.slopes[s] * ja + spec.beta[s] == la]
    cands = [abs(Fraction(spec.mu[-1])) / 2, gamma / (4 * (c + 1))]
    if S:
        s_lo, s_hi = S[0], S[-1]
        A = max(abs(Fraction(spec.slopes[s])) for s in S)
        for s in range(max(s_lo - 1, 0), s_hi + 1):
            t = _t_index(spec, s, s_lo, s_hi, spec.mu)
            cands.append(abs(Fraction(spec.mu[s])) / 2)
            cands.append(abs(spec.lam[s] + spec.mu[s] * spec.slopes[t]) / (8 * (A + 1)))
    return min(cands)


def perturb_spec(spec, rng, radius):
    """(lam, mu, nu) with uniform deltas in [-radius/2, radius/2] and the anchor value kept at 0."""
    m = len(spec.slopes)
    dl = rng.uniform(-float(radius) / 2, float(radius) / 2, size=m)
    dm = rng.uniform(-float(radius) / 2, float(radius) / 2, size=m)
    lam = [float(x) + a for x, a in zip(spec.lam, dl)]
    mu = [float(x) + b for x, b in zip(spec.mu, dm)]
    ja, la = float(spec.j_coef), float(spec.l_coef)
    # intercept correction: each piece keeps its (extended) value at the anchor
    nu = [float(spec.lam[s]) * ja + float(spec.mu[s]) * la + float(spec.nu[s]) - lam[s] * ja - mu[s] * la
          for s in range(m)]
    return lam, mu, nu


def step5_spec(params, family="F1"):
    """The summation-lemma spec of log2 F / log2 n for F1 or F2, normalized to vanish at its argmax corner.

    Boundaries are 0 <= l-tilde <= l-bar in units of L; degenerate middle
    pieces (case A) are dropped.
    """
    st = _family_setup(params, family)
    label, u, v, e = max(((lb, u, v, e) for lb, u, v, e in corner_table(params, family)),
                         key=lambda t: t[3])
    # recover linear coefficients of the boundaries: value at u = 0 and slope
    def affine(f):
        b = f(Fraction(0))
        return f(Fraction(1)) - b, b

    bounds = [(Fraction(0), Fraction(0))]
    pieces = [st.pieces[0]]
    if st.pieces[1] is not None:
        bounds.append(affine(st.ltil))
        pieces.append(st.pieces[1])
    bounds.append(affine(st.lbar))
    pieces.append(st.pieces[2])
    n_coef = Fraction(1) if family == "F1" else st.j0
    slopes = tuple(a for a, _ in bounds)
    beta = tuple(b for _, b in bounds)
    lam = tuple(p[2] for p in pieces)
    mu = tuple(p[1] for p in pieces)
    nu = tuple(p[0] - e for p in pieces)
    return PiecewiseAffineSpec(slopes, beta, lam, mu, nu, n_coef, u != 0, v)
