"""Closed-form order formulas for widths of finite-dimensional (mixed-norm) balls.

All values are bare orders: the constants hidden in the asymptotic
equivalences are not modeled, so downstream checks compare ratios.
"""
from dataclasses import dataclass
from fractions import Fraction
import math

from .mixed_norm_core import check_exponent, dual_exponent, lambda_vec

__all__ = [
    "lambda_vec",
    "phi",
    "psi",
    "Phi0Regime",
    "phi0",
    "phi0_local_exponent",
    "linear_width_upper",
    "stesin_exact",
    "WINDOW_FRACTION",
]

# n <= WINDOW_FRACTION * m * k is treated as the trusted window of phi0
WINDOW_FRACTION = 0.5

REGIME_TAGS = ("UNIT", "P_BRANCH_MID", "P_BRANCH_HIGH", "Q_BRANCH_MID", "Q_BRANCH_HIGH", "GENERIC_MIN")


def _f(x):
    return float(x)


def _inv_sqrt(n):
    return math.inf if n == 0 else n ** -0.5


def _pow(base, e):
    if base == 0:
        return 0.0 if e > 0 else 1.0
    return base ** e


def phi(n, nu, p, q):
    """Three-branch order of d_n(B_p^nu, l_q^nu) for 1 < p <= q."""
    check_exponent(p, "p")
    check_exponent(q, "q")
    n, nu, p, q = int(n), int(nu), _f(p), _f(q)
    if p > q:
        raise ValueError(f"need p <= q, got p={p}, q={q}")
    if nu < 1 or not 0 <= n <= nu:
        raise ValueError(f"need 0 <= n <= nu, nu >= 1; got n={n}, nu={nu}")
    if p >= 2:
        if p == q:
            expo = 1.0 if p == 2 else 0.0
        else:
            expo = (1 / p - 1 / q) / (0.5 - 1 / q)
        base = nu ** (1 / q) * _inv_sqrt(n)
        if math.isinf(base):
            return 1.0
        return min(1.0, _pow(base, expo))
    floor = nu ** (1 / q - 1 / p)
    if q >= 2:
        return max(floor, min(1.0, nu ** (1 / q) * _inv_sqrt(n)) * (1 - n / nu) ** 0.5)
    expo = (1 / q - 1 / p) / (1 - 2 / p)
    return max(floor, _pow(1 - n / nu, expo))


def psi(n, nu, p, q):
    """Order of the linear width: phi itself when 1/p + 1/q >= 1, else phi at (q', p')."""
    check_exponent(p, "p")
    check_exponent(q, "q")
    if Fraction(1) / Fraction(p) + Fraction(1) / Fraction(q) >= 1:
        return phi(n, nu, p, q)
    return phi(n, nu, dual_exponent(q), dual_exponent(p))


@dataclass(frozen=True)
class Phi0Regime:
    """Value of the mixed-norm width order and the active simplification branch."""

    tag: str
    value: float
    extrapolated: bool = False


def _check_phi0_window(p1, p2, q1, q2):
    for name, v in (("p1", p1), ("p2", p2), ("q1", q1), ("q2", q2)):
        check_exponent(v, name)
    if not p1 <= p2:
        raise ValueError(f"window violation: need p1 <= p2, got p1={p1}, p2={p2}")
    if not q1 <= q2:
        raise ValueError(f"window violation: need q1 <= q2, got q1={q1}, q2={q2}")
    if not p2 >= 2:
        raise ValueError(f"window violation: need p2 >= 2, got p2={p2}")
    if not q2 >= 2:
        raise ValueError(f"window violation: need q2 >= 2, got q2={q2}")


def _phi0_terms(m, k, n, p1, p2, q1, q2):
    """Candidate terms of the min and their tags, as (value, tag) pairs."""
    lp, lq = float(lambda_vec(p1, p2)), float(lambda_vec(q1, q2))
    p1, p2, q1, q2 = map(_f, (p1, p2, q1, q2))
    s = _inv_sqrt(n)
    base = s * m ** (1 / p2) * k ** (1 / q2)
    terms = [(1.0, "UNIT")]
    if p1 <= 2 and q1 <= 2:
        terms.append((base, "GENERIC_MIN"))
    elif lp <= lq and lp < 1:
        terms.append((_pow(base, lp), "P_BRANCH_MID"))
        terms.append((m ** (1 / p2 - 1 / p1) * _pow(s * m ** 0.5 * k ** (1 / q2), lq), "P_BRANCH_HIGH"))
    else:
        terms.append((_pow(base, lq), "Q_BRANCH_MID"))
        terms.append((k ** (1 / q2 - 1 / q1) * _pow(s * m ** (1 / p2) * k ** 0.5, lp), "Q_BRANCH_HIGH"))
    return terms


def phi0(m, k, n, p1, p2, q1, q2, window=WINDOW_FRACTION):
    """Order of d_n(B_{p1,q1}^{m,k}, l_{p2,q2}^{m,k}) with its branch tag.

    The value is the full min over the branch terms; the tag names the term
    achieving it (ties resolve toward the earlier, lower-n branch).
    ``extrapolated`` is set when n exceeds window * m * k.
    """
    _check_phi0_window(p1, p2, q1, q2)
    m, k, n = int(m), int(k), int(n)
    if m < 1 or k < 1 or n < 0:
        raise ValueError(f"need m, k >= 1 and n >= 0, got m={m}, k={k}, n={n}")
    terms = _phi0_terms(m, k, n, p1, p2, q1, q2)
    value, tag = terms[0]
    for v, t in terms[1:]:
        if v < value * (1 - 1e-12):
            value, tag = v, t
    return Phi0Regime(tag=tag, value=float(value), extrapolated=n > window * m * k)


def phi0_local_exponent(m, k, n, p1, p2, q1, q2):
    """d log(phi0) / d log(n) of the active branch term."""
    reg = phi0(m, k, n, p1, p2, q1, q2)
    lp, lq = float(lambda_vec(p1, p2)), float(lambda_vec(q1, q2))
    return {
        "UNIT": 0.0,
        "GENERIC_MIN": -0.5,
        "P_BRANCH_MID": -lp / 2,
        "P_BRANCH_HIGH": -lq / 2,
        "Q_BRANCH_MID": -lq / 2,
        "Q_BRANCH_HIGH": -lp / 2,
    }[reg.tag]


def linear_width_upper(m, k, n, p1, q1, p2, q2):
    """min{n^{-1/2} m^{max(1/p2, 1/p1')} k^{max(1/q2, 1/q1')}, 1}."""
    for name, v in (("p1", p1), ("q1", q1), ("p2", p2), ("q2", q2)):
        check_exponent(v, name)
    if not (p1 <= 2 <= p2 and q1 <= 2 <= q2):
        raise ValueError(f"window violation: need p1 <= 2 <= p2 and q1 <= 2 <= q2, got ({p1}, {q1}, {p2}, {q2})")
    p1, q1, p2, q2 = map(_f, (p1, q1, p2, q2))
    a = max(1 / p2, 1 - 1 / p1)
    b = max(1 / q2, 1 - 1 / q1)
    return float(min(_inv_sqrt(int(n)) * m ** a * k ** b, 1.0))


def stesin_exact(n, nu, p, q):
    """Exact d_n(B_p^nu, l_q^nu) = (nu - n)^{1/q - 1/p} for q <= p (known classical value)."""
    if _f(q) < 1 or _f(p) < 1:
        raise ValueError("exponents must be >= 1")
    if _f(p) < _f(q):
        raise ValueError(f"need q <= p, got p={p}, q={q}")
    n, nu = int(n), int(nu)
    if not 0 <= n < nu:
        raise ValueError(f"need 0 <= n < nu, got n={n}, nu={nu}")
    return float((nu - n) ** (1 / _f(q) - 1 / _f(p)))
