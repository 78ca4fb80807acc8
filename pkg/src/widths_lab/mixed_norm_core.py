"""Mixed norms, dual exponents and the pointwise inequalities used by the width bounds.

A mixed vector is an m x k array: the inner l_p norm runs down each column
(index i), the outer l_q norm runs over the k columns (index j).
"""
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "SpaceSpec",
    "check_exponent",
    "dual_exponent",
    "mixed_norm",
    "norm_gradient",
    "dual_attainer",
    "rearrange_nonincreasing",
    "lambda_vec",
    "interpolation_slack",
    "convexity_bound_slack",
    "find_c1",
    "norm_interpolation_slack",
]

SLACK_TOL = 1e-12


def check_exponent(p, name="p"):
    """Validate an exponent in the open interval (1, inf) and return it unchanged."""
    if isinstance(p, bool) or not np.isfinite(float(p)) or not float(p) > 1:
        raise ValueError(f"exponent {name}={p} must satisfy 1 < {name} < inf")
    return p


@dataclass(frozen=True)
class SpaceSpec:
    """The space l_{p,q}^{m,k}; with k = 1 it is plain l_p^m."""

    m: int
    k: int
    p: float
    q: float

    def __post_init__(self):
        if int(self.m) < 1 or int(self.k) < 1:
            raise ValueError(f"need m >= 1 and k >= 1, got m={self.m}, k={self.k}")
        check_exponent(self.p, "p")
        check_exponent(self.q, "q")

    @property
    def dim(self):
        return self.m * self.k

    @property
    def shape(self):
        return (self.m, self.k)

    def dual(self):
        return SpaceSpec(self.m, self.k, dual_exponent(self.p), dual_exponent(self.q))


def dual_exponent(p):
    """p' = p / (p - 1), exact for ints and Fractions."""
    check_exponent(p)
    if isinstance(p, Rational):
        p = Fraction(p)
        return p / (p - 1)
    return p / (p - 1.0)


def _as_blocks(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x


def mixed_norm(x, p, q):
    """Evaluate (sum_j (sum_i |x_ij|^p)^{q/p})^{1/q}.

    Leading axes are treated as a batch, the last two are (i, j).
    """
    x = _as_blocks(x)
    p, q = float(p), float(q)
    a = np.abs(x)
    scale = a.max(axis=(-2, -1), keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    a = a / safe
    cols = np.sum(a ** p, axis=-2) ** (1.0 / p)
    val = np.sum(cols ** q, axis=-1) ** (1.0 / q)
    return val * safe[..., 0, 0]


def norm_gradient(x, p, q):
    """Gradient of the mixed norm at x (zero where x vanishes).

    It is also the norming functional: <g, x> = ||x||_{p,q} and ||g||_{p',q'} = 1.
    """
    x = _as_blocks(x)
    p, q = float(p), float(q)
    a = np.abs(x)
    scale = a.max(axis=(-2, -1), keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    a = a / safe
    cols = np.sum(a ** p, axis=-2, keepdims=True) ** (1.0 / p)
    total = np.sum(cols ** q, axis=-1, keepdims=True) ** (1.0 / q)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = np.where(cols > 0, (cols / np.where(total > 0, total, 1.0)) ** (q - 1.0), 0.0)
        inner = np.where(a > 0, (a / np.where(cols > 0, cols, 1.0)) ** (p - 1.0), 0.0)
    return np.sign(x) * outer * inner


def dual_attainer(z, p, q):
    """The x with ||x||_{p,q} = 1 maximizing <z, x>, i.e. the gradient of the dual norm at z."""
    return norm_gradient(z, dual_exponent(float(p)), dual_exponent(float(q)))


def rearrange_nonincreasing(x):
    """Magnitudes of x sorted in non-increasing order."""
    return np.sort(np.abs(np.asarray(x, dtype=float)).ravel())[::-1]


def _frac_or_float(x):
    if isinstance(x, Rational):
        return Fraction(x)
    return float(x)


def lambda_vec(p1, p2):
    """min{(1/p1 - 1/p2)/(1/2 - 1/p2), 1}, with the value 1 when p2 = 2.

    Exact (a Fraction) when both exponents are rational.
    """
    check_exponent(p1, "p1")
    check_exponent(p2, "p2")
    p1, p2 = _frac_or_float(p1), _frac_or_float(p2)
    if p1 > p2:
        raise ValueError(f"need p1 <= p2, got p1={p1}, p2={p2}")
    if p2 < 2:
        raise ValueError(f"need p2 >= 2, got p2={p2}")
    if p2 == 2:
        return Fraction(1) if isinstance(p2, Fraction) else 1.0
    half = Fraction(1, 2) if isinstance(p1, Fraction) and isinstance(p2, Fraction) else 0.5
    val = (1 / p1 - 1 / p2) / (half - 1 / p2)
    return min(val, 1 if isinstance(val, Fraction) else 1.0)


def _unit_scale(v):
    v = np.asarray(v, dtype=float)
    s = np.max(np.abs(v)) if v.size else 0.0
    return v / s if s > 0 else v


def interpolation_slack(a, b, v1, v2, lam):
    """RHS - LHS of the Hoelder-type interpolation bound

        (sum a^{v1' lam} b^{v1'(1-lam)})^{1/v1'} <= (sum a^2)^{lam/2} (sum b^{v2'})^{(1-lam)/v2'}.

    a and b are rescaled to unit max first (both sides are homogeneous in a and in b).
    """
    v1, v2, lam = float(v1), float(v2), float(lam)
    if v1 < 2 or v1 > v2:
        raise ValueError(f"need 2 <= v1 <= v2, got v1={v1}, v2={v2}")
    lam_max = float(lambda_vec(v1, v2))
    if not 0 < lam <= lam_max + SLACK_TOL:
        raise ValueError(f"need 0 < lam <= lambda(v) = {lam_max}, got {lam}")
    a, b = _unit_scale(a), _unit_scale(b)
    if a.shape != b.shape or np.any(a < 0) or np.any(b < 0):
        raise ValueError("a and b must be nonnegative vectors of equal length")
    w1, w2 = v1 / (v1 - 1), v2 / (v2 - 1)
    lhs = np.sum(a ** (w1 * lam) * b ** (w1 * (1 - lam))) ** (1 / w1)
    rhs = np.sum(a ** 2) ** (lam / 2) * np.sum(b ** w2) ** ((1 - lam) / w2)
    return float(rhs - lhs)


def _convexity_parts(x, p, q):
    x = np.asarray(x, dtype=float).ravel()
    r = x.size
    lhs = np.sum(np.abs(1 - x) ** p) ** (q / p)
    fixed = r ** (q / p) / 2 - q * r ** (q / p - 1) * np.sum(x)
    coef = np.sum(np.abs(x) ** p) ** (q / p)
    return lhs, fixed, coef


def convexity_bound_slack(x, p, q, c1):
    """LHS - RHS of (sum|1-x_i|^p)^{q/p} >= r^{q/p}/2 + c1 (sum|x_i|^p)^{q/p} - q r^{q/p-1} sum x_i."""
    p, q = float(p), float(q)
    if len(np.ravel(x)) < 1:
        raise ValueError("x must be nonempty")
    lhs, fixed, coef = _convexity_parts(x, p, q)
    return float(lhs - fixed - c1 * coef)


def _c1_sample(rng, trials):
    dims = rng.integers(1, 9, size=trials)
    return [rng.uniform(-10, 10, size=r) for r in dims]


def find_c1(p, q, trials, seed=0):
    """Largest c in {2^-20, ..., 2} keeping convexity_bound_slack >= 0 on sampled x.

    The sample is random x (dimension 1..8, entries in [-10, 10]); the worst
    samples are then refined by a bounded local search, which makes the
    calibrated constant robust against fresh draws.
    """
    if int(trials) < 1:
        raise ValueError("trials must be >= 1")
    p, q = float(p), float(q)
    rng = np.random.default_rng([int(seed), 1])
    xs = _c1_sample(rng, int(trials))

    def ratio(x):
        lhs, fixed, coef = _convexity_parts(x, p, q)
        return (lhs - fixed) / coef if coef > 0 else np.inf

    ratios = np.array([ratio(x) for x in xs])
    worst = np.argsort(ratios)[: min(8, len(xs))]
    best = float(ratios.min())
    for idx in worst:
        x0 = xs[idx]
        res = minimize(ratio, x0, method="L-BFGS-B", bounds=[(-10, 10)] * x0.size)
        best = min(best, float(res.fun), float(ratio(res.x)))
    grid = 2.0 ** np.arange(-20, 2)
    ok = grid[grid <= best * (1 - 1e-9)]
    return float(ok[-1]) if ok.size else float(grid[0])


def norm_interpolation_slack(x, p1, q1, p2, q2, lam):
    """RHS - LHS of ||x||_{p1',q1'} <= ||x||_{2,2}^lam ||x||_{p2',q2'}^{1-lam}.

    Valid for 2 <= p1 <= p2, 2 <= q1 <= q2 and lam no larger than both
    lambda(p1, p2) and lambda(q1, q2); the usual choices are those two values.
    x is rescaled to unit max (both sides are 1-homogeneous).
    """
    for name, v in (("p1", p1), ("q1", q1), ("p2", p2), ("q2", q2)):
        check_exponent(v, name)
    if not (2 <= p1 <= p2 and 2 <= q1 <= q2):
        raise ValueError(f"need 2 <= p1 <= p2 and 2 <= q1 <= q2, got ({p1}, {q1}, {p2}, {q2})")
    lam = float(lam)
    cap = min(float(lambda_vec(p1, p2)), float(lambda_vec(q1, q2)))
    if not 0 <= lam <= cap + SLACK_TOL:
        raise ValueError(f"need 0 <= lam <= min(lambda(p), lambda(q)) = {cap}, got {lam}")
    x = _unit_scale(_as_blocks(x))
    d = dual_exponent
    lhs = mixed_norm(x, d(float(p1)), d(float(q1)))
    rhs = mixed_norm(x, 2, 2) ** lam * mixed_norm(x, d(float(p2)), d(float(q2))) ** (1 - lam)
    return float(rhs - lhs)
