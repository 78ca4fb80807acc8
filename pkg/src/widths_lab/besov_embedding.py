"""Power-log weights, dyadic cube masses, the discretized sequence norms and
the exponent classifier for widths of weighted Besov embeddings.

Radial weights are functions of the max-norm |x| = max_i |x_i|, so the ball
of radius r is the cube [-r, r]^d and the seam |x| = 1/2 is axis-aligned.
Parameters are kept exact (Fractions) whenever they are given exactly.
"""
from dataclasses import dataclass, field, fields
from fractions import Fraction
from numbers import Rational
import math

import numpy as np
from scipy.special import logsumexp

from .mixed_norm_core import check_exponent, dual_exponent, lambda_vec

__all__ = [
    "RhoSpec",
    "EmbeddingParams",
    "ParamsError",
    "WindowViolation",
    "NoStrictMinimizer",
    "Case3Degenerate",
    "Asymptotics",
    "RadialWeight",
    "parse_params",
    "read_params_file",
    "format_params",
    "weight_g",
    "weight_v",
    "w1",
    "w2",
    "constant_weight",
    "power_weight",
    "w1_weight",
    "w2_weight",
    "radial_mass",
    "muckenhoupt_ratio",
    "muckenhoupt_exponent",
    "cube_mass",
    "box_mass",
    "entry_factor",
    "entry_order",
    "zero_cube_order",
    "seq_norm_X1",
    "seq_norm_X1_tilde",
    "seq_norm_X2",
    "projection_norm",
    "projection_norm_inverse",
    "theta_table",
    "tilde_theta_table",
    "classify",
]

TIE_TOL = 1e-12
RADIAL_NODES = 2 ** 14
CUBE_RTOL = 1e-6
CUBE_MAX_NODES = 2 ** 20


class ParamsError(ValueError):
    """A parameter invariant is violated; the message names it."""


class WindowViolation(ValueError):
    """The exponents are outside the window of the requested case."""


class NoStrictMinimizer(ValueError):
    """Two or more candidate exponents tie, so the order is not determined."""

    def __init__(self, tied, table):
        self.tied = tuple(tied)
        self.table = table
        super().__init__("tie: {" + ",".join(str(j) for j in self.tied) + "}")


class Case3Degenerate(ValueError):
    """alpha = delta / d, where the two competing terms have the same power."""


def _exact(x):
    """Fraction for ints, Fractions and finite decimal strings; float otherwise."""
    if isinstance(x, bool):
        raise TypeError("boolean is not a number")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    return float(x)


def _is_exact(*xs):
    return all(isinstance(x, Fraction) for x in xs)


# ------------------------------------------------------------------ rho


@dataclass(frozen=True)
class RhoSpec:
    """rho(y) = log(e + y)^c1 * log(e + log(e + y))^c2, a slowly varying factor."""

    c1: float = 0
    c2: float = 0

    def __post_init__(self):
        if self.c1 == 0 and self.c2 == 0:
            return
        h = self.slow_variation()
        if not (np.all(np.diff(h) < 0) and h[-1] < 0.1):
            raise ParamsError(f"rho with (c1, c2) = ({self.c1}, {self.c2}) fails the slow-variation check: {h}")

    def log(self, y):
        y = np.asarray(y, dtype=float)
        l1 = np.log(np.e + y)
        return float(self.c1) * np.log(l1) + float(self.c2) * np.log(np.log(np.e + l1))

    def __call__(self, y):
        return np.exp(self.log(y))

    def slow_variation(self, ys=(1e2, 1e4, 1e6, 1e8), rel_step=1e-4):
        """|y rho'(y) / rho(y)| by central differences of log rho."""
        ys = np.asarray(ys, dtype=float)
        h = ys * rel_step
        dlog = (self.log(ys + h) - self.log(ys - h)) / (2 * h)
        return np.abs(ys * dlog)

    def __mul__(self, other):
        return RhoSpec(self.c1 + other.c1, self.c2 + other.c2)

    @property
    def trivial(self):
        return self.c1 == 0 and self.c2 == 0


# --------------------------------------------------------------- params


_REAL_KEYS = ("s1", "s2", "p1", "q1", "p2", "q2", "beta_g", "beta_v", "alpha_g", "alpha_v", "gamma_g", "gamma_v")


@dataclass(frozen=True)
class EmbeddingParams:
    d: int
    s1: object
    s2: object
    p1: object
    q1: object
    p2: object
    q2: object
    beta_g: object
    beta_v: object
    alpha_g: object
    alpha_v: object
    gamma_g: object
    gamma_v: object
    rho_g: RhoSpec = field(default_factory=RhoSpec)
    rho_v: RhoSpec = field(default_factory=RhoSpec)

    def __post_init__(self):
        if isinstance(self.d, bool) or int(self.d) != self.d or int(self.d) < 1:
            raise ParamsError(f"d must be a positive integer, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        for key in _REAL_KEYS:
            object.__setattr__(self, key, _exact(getattr(self, key)))
        for key in ("p1", "q1", "p2", "q2"):
            try:
                check_exponent(getattr(self, key), key)
            except ValueError as exc:
                raise ParamsError(str(exc)) from None
        d = self.d
        checks = [
            (self.p1 <= self.p2, "p1 <= p2"),
            (self.q1 <= self.q2, "q1 <= q2"),
            (self.delta > 0, "delta = s1 - s2 + d/p2 - d/p1 > 0"),
            (self.beta_g > -d / self.p1, "beta_g > -d/p1"),
            (self.beta_v < d / self.p2, "beta_v < d/p2"),
            (self.gamma_g > -d / self.p1, "gamma_g > -d/p1"),
            (self.gamma_v < d / self.p2, "gamma_v < d/p2"),
            (self.gamma_g + self.gamma_v > self.delta, "gamma_g + gamma_v > delta"),
            (self.alpha > 0, "alpha = alpha_g + alpha_v > 0"),
        ]
        bsum = self.beta_g + self.beta_v
        if _is_exact(bsum, self.delta):
            checks.insert(3, (bsum == self.delta, "beta_g + beta_v = delta"))
        else:
            checks.insert(3, (abs(float(bsum) - float(self.delta)) <= TIE_TOL, "beta_g + beta_v = delta"))
        for ok, name in checks:
            if not ok:
                raise ParamsError(f"invariant violated: {name}")

    @property
    def delta(self):
        return self.s1 - self.s2 + self.d / self.p2 - self.d / self.p1 if not _is_exact(self.p1, self.p2) \
            else self.s1 - self.s2 + Fraction(self.d) / self.p2 - Fraction(self.d) / self.p1

    @property
    def alpha(self):
        return self.alpha_g + self.alpha_v

    @property
    def rho(self):
        return self.rho_g * self.rho_v

    def shifted(self, c):
        """Same embedding with (s1, s2) -> (s1 + c, s2 + c)."""
        vals = {f.name: getattr(self, f.name) for f in fields(self)}
        vals["s1"] = vals["s1"] + c
        vals["s2"] = vals["s2"] + c
        return EmbeddingParams(**vals)


_RHO_KEYS = ("rho_g_c1", "rho_g_c2", "rho_v_c1", "rho_v_c2")
PARAM_KEYS = ("d",) + _REAL_KEYS + _RHO_KEYS


def parse_params(text):
    """Parse `name = value` lines (# comments) into (EmbeddingParams, extras).

    Values are read exactly (3/2, 0.1 become Fractions). Keys outside the
    parameter set (such as `part`) are returned in ``extras``.
    """
    vals, extras = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamsError(f"line {lineno}: expected 'name = value', got {raw!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        try:
            parsed = Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise ParamsError(f"line {lineno}: cannot parse value {value!r} for {key}") from None
        target = vals if key in PARAM_KEYS else extras
        if key in target:
            raise ParamsError(f"line {lineno}: duplicate key {key}")
        target[key] = parsed
    missing = [k for k in ("d",) + _REAL_KEYS if k not in vals]
    if missing:
        raise ParamsError("missing keys: " + ", ".join(missing))
    if vals["d"].denominator != 1:
        raise ParamsError(f"d must be a positive integer, got {vals['d']}")
    rho_g = RhoSpec(vals.pop("rho_g_c1", Fraction(0)), vals.pop("rho_g_c2", Fraction(0)))
    rho_v = RhoSpec(vals.pop("rho_v_c1", Fraction(0)), vals.pop("rho_v_c2", Fraction(0)))
    d = int(vals.pop("d"))
    return EmbeddingParams(d=d, rho_g=rho_g, rho_v=rho_v, **vals), extras


def read_params_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_params(fh.read())


def format_params(params):
    """Canonical `name = value` text (one line per key, fixed order)."""
    vals = {"d": params.d}
    vals.update({k: getattr(params, k) for k in _REAL_KEYS})
    vals.update(rho_g_c1=params.rho_g.c1, rho_g_c2=params.rho_g.c2,
                rho_v_c1=params.rho_v.c1, rho_v_c2=params.rho_v.c2)
    return "".join(f"{k} = {_fmt_value(v)}\n" for k, v in vals.items())


def _fmt_value(v):
    if isinstance(v, Rational):
        return str(Fraction(v))
    return f"{float(v):.12g}"


# -------------------------------------------------------------- weights


def _log_branch_weight(r, beta, alpha, rho, gamma):
    """log of r^-beta |log2 r|^-alpha rho(|log2 r|) for r <= 1/2, r^-gamma beyond."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.log(r)
        L = np.abs(lr) / math.log(2)
        inner = -float(beta) * lr - float(alpha) * np.log(np.where(r <= 0.5, L, 1.0)) + rho.log(np.where(r <= 0.5, L, 1.0))
        outer = -float(gamma) * lr
    return np.where(r <= 0.5, inner, outer)


def _log_g(r, params):
    return _log_branch_weight(r, params.beta_g, params.alpha_g, params.rho_g, params.gamma_g)


def _log_v(r, params):
    return _log_branch_weight(r, params.beta_v, params.alpha_v, params.rho_v, params.gamma_v)


def weight_g(x_norm, params):
    """g at |x| = x_norm (branch |x| <= 1/2 inclusive)."""
    return np.exp(_log_g(x_norm, params))


def weight_v(x_norm, params):
    return np.exp(_log_v(x_norm, params))


def w1(x_norm, params):
    """w1 = g^-p1."""
    return np.exp(-float(params.p1) * _log_g(x_norm, params))


def w2(x_norm, params):
    """w2 = v^p2."""
    return np.exp(float(params.p2) * _log_v(x_norm, params))


@dataclass(frozen=True)
class RadialWeight:
    """A weight w(x) = exp(logfn(|x|)) on R^d, |x| the max-norm.

    ``zero_power`` is the power a with w ~ r^a (up to slowly varying factors)
    near the origin; ``seams`` are radii where the weight is not smooth.
    """

    d: int
    logfn: object
    zero_power: float
    seams: tuple = ()

    def __call__(self, r):
        return np.exp(self.logfn(np.asarray(r, dtype=float)))

    def power(self, s):
        """The weight w^s."""
        f = self.logfn
        return RadialWeight(self.d, lambda r: s * f(r), s * self.zero_power, self.seams)


def constant_weight(d):
    return RadialWeight(int(d), lambda r: np.zeros_like(np.asarray(r, dtype=float)), 0.0)


def power_weight(d, a):
    """w(x) = |x|^a."""
    a = float(a)
    return RadialWeight(int(d), lambda r: a * np.log(r), a)


def w1_weight(params):
    p1 = float(params.p1)
    return RadialWeight(params.d, lambda r: -p1 * _log_g(r, params), p1 * float(params.beta_g), (0.5,))


def w2_weight(params):
    p2 = float(params.p2)
    return RadialWeight(params.d, lambda r: p2 * _log_v(r, params), -p2 * float(params.beta_v), (0.5,))


# ----------------------------------------------------------- quadrature


def _log_radial_mass(weight, radius, nodes=RADIAL_NODES):
    """log of the integral of w over the max-norm ball of the given radius.

    The radial measure is d 2^d r^(d-1) dr; the integral is a midpoint rule
    in u = log r on segments split at the seams, the lowest one extended
    far enough that the neglected part near 0 is below double precision.
    """
    d = weight.d
    expo = weight.zero_power + d
    if not expo > 0:
        raise ValueError(f"non-finite quadrature: weight ~ r^{weight.zero_power} is not integrable at 0 in dimension {d}")
    R = float(radius)
    if not R > 0:
        raise ValueError("radius must be positive")
    lo_span = min(60.0 / expo + 8.0, 5000.0)
    cuts = [math.log(s) for s in weight.seams if s < R]
    edges = [math.log(R) - lo_span - max(0.0, math.log(R) - min(cuts)) if cuts else math.log(R) - lo_span]
    edges += sorted(cuts) + [math.log(R)]
    parts = []
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        h = (b - a) / nodes
        u = a + h * (np.arange(nodes) + 0.5)
        lw = weight.logfn(np.exp(u)) + d * u
        parts.append(logsumexp(lw) + math.log(h))
    total = logsumexp(parts) + math.log(d) + d * math.log(2)
    if not np.isfinite(total):
        raise ValueError("non-finite quadrature: check the exponent constraints")
    return float(total)


def radial_mass(weight, radius, nodes=RADIAL_NODES):
    """Integral of a radial weight over the max-norm ball [-radius, radius]^d."""
    return math.exp(_log_radial_mass(weight, radius, nodes))


def muckenhoupt_ratio(weight, p, radius, nodes=RADIAL_NODES):
    """(avg_B w)^(1/p) (avg_B w^(-p'/p))^(1/p') over the origin-centered ball B of the given radius."""
    check_exponent(p)
    p = float(p)
    pp = float(dual_exponent(p))
    logvol = weight.d * math.log(2 * float(radius))
    a = _log_radial_mass(weight, radius, nodes) - logvol
    b = _log_radial_mass(weight.power(-pp / p), radius, nodes) - logvol
    out = math.exp(a / p + b / pp)
    if not np.isfinite(out):
        raise ValueError("non-finite quadrature: check the exponent constraints")
    return out


def muckenhoupt_exponent(weight, far_power=0.0):
    """An exponent p for which the power-type weight w ~ r^a (a = zero power) is in A_p.

    Power weights |x|^a belong to A_p exactly when -d < a < d (p - 1);
    ``far_power`` is the power of the weight at infinity. The result adds a
    unit margin to the smallest admissible exponent.
    """
    top = max(weight.zero_power, float(far_power), 0.0)
    return 2.0 + top / weight.d


def _cube_bounds(nu, m_idx):
    m = np.atleast_1d(np.asarray(m_idx, dtype=float))
    h = 2.0 ** -int(nu)
    return (m - 0.5) * h, (m + 0.5) * h


def _axis_pieces(lo, hi, seams):
    cuts = [lo]
    for s in sorted(set(seams) | {-x for x in seams}):
        if lo < s < hi:
            cuts.append(s)
    cuts.append(hi)
    return list(zip(cuts[:-1], cuts[1:]))


def _log_box_midpoint(weight, lo, hi, per_piece):
    """log of the tensor midpoint rule with per_piece nodes on each seam-free axis piece."""
    axes, wts = [], []
    for a, b in zip(lo, hi):
        xs, ws = [], []
        for p, q in _axis_pieces(a, b, weight.seams):
            h = (q - p) / per_piece
            xs.append(p + h * (np.arange(per_piece) + 0.5))
            ws.append(np.full(per_piece, h))
        axes.append(np.concatenate(xs))
        wts.append(np.concatenate(ws))
    grids = np.meshgrid(*axes, indexing="ij")
    r = np.max(np.abs(np.stack(grids)), axis=0)
    logw = weight.logfn(r)
    logvol = sum(np.meshgrid(*[np.log(w) for w in wts], indexing="ij"))
    return float(logsumexp(logw + logvol)), r.size


def _log_box_mass(weight, lo, hi, rtol=CUBE_RTOL, max_nodes=CUBE_MAX_NODES):
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if np.all(lo < 0) and np.all(hi > 0):
        raise ValueError("boxes containing the origin need the radial path")
    per = 4
    prev, size = _log_box_midpoint(weight, lo, hi, per)
    while True:
        per *= 2
        if size * 2 ** weight.d > max_nodes:
            return prev
        cur, size = _log_box_midpoint(weight, lo, hi, per)
        if abs(math.expm1(cur - prev)) <= rtol:
            return cur
        prev = cur


def box_mass(weight, lo, hi, rtol=CUBE_RTOL, max_nodes=CUBE_MAX_NODES):
    """Integral of a radial weight over the box prod [lo_i, hi_i] (not containing 0).

    Tensor midpoint rule, split at the seams, refined until two successive
    levels agree to rtol or the node cap is reached.
    """
    return math.exp(_log_box_mass(weight, lo, hi, rtol, max_nodes))


def _log_cube_mass(weight, nu, m_idx):
    m = np.atleast_1d(np.asarray(m_idx, dtype=int))
    if m.size != weight.d:
        raise ValueError(f"lattice point has {m.size} coordinates, weight lives in dimension {weight.d}")
    if not np.any(m):
        return _log_radial_mass(weight, 2.0 ** (-int(nu) - 1))
    lo, hi = _cube_bounds(nu, m)
    return _log_box_mass(weight, lo, hi)


def cube_mass(weight, nu, m_idx):
    """w(Q) for the cube Q of side 2^-nu centered at 2^-nu m."""
    return math.exp(_log_cube_mass(weight, nu, m_idx))


def zero_cube_order(weight_kind, params, nu):
    """The order r^(a+d) |log2 r|^c rho^e at r = 2^-nu for the origin cube of w1 or w2."""
    r = 2.0 ** -int(nu)
    L = float(nu)
    d = params.d
    if weight_kind == "w1":
        p1 = float(params.p1)
        return r ** (float(params.beta_g) * p1 + d) * L ** (float(params.alpha_g) * p1) * params.rho_g(L) ** -p1
    if weight_kind == "w2":
        p2 = float(params.p2)
        return r ** (-float(params.beta_v) * p2 + d) * L ** (-float(params.alpha_v) * p2) * params.rho_v(L) ** p2
    raise ValueError("weight_kind must be 'w1' or 'w2'")


def _log_entry_factor(params, nu, m_idx, W1=None, W2=None):
    W1 = W1 or w1_weight(params)
    W2 = W2 or w2_weight(params)
    return (-int(nu) * float(params.s1 - params.s2) * math.log(2)
            - _log_cube_mass(W1, nu, m_idx) / float(params.p1)
            + _log_cube_mass(W2, nu, m_idx) / float(params.p2))


def entry_factor(params, nu, m_idx):
    """2^(-nu (s1 - s2)) w1(Q)^(-1/p1) w2(Q)^(1/p2): the diagonal entry of the discretized embedding."""
    return math.exp(_log_entry_factor(params, nu, m_idx))


def entry_order(params, nu, m_idx):
    """|m|^-delta L^-alpha rho(L) with L = log2(2^nu / |m|) (m != 0), or nu^-alpha rho(nu) for m = 0."""
    m = np.atleast_1d(np.asarray(m_idx, dtype=int))
    alpha = float(params.alpha)
    if not np.any(m):
        return float(nu) ** -alpha * float(params.rho(float(nu)))
    M = float(np.max(np.abs(m)))
    L = int(nu) - math.log2(M)
    return M ** -float(params.delta) * L ** -alpha * float(params.rho(L))


# ---------------------------------------------------- sequence norms


def _group(lam):
    """{nu: [(m, value), ...]} from {(nu, m): value}."""
    out = {}
    for (nu, m), val in lam.items():
        out.setdefault(int(nu), []).append((tuple(np.atleast_1d(m).tolist()), float(val)))
    return out


def _mixed_levels(level_sums, q, p):
    if not level_sums:
        return 0.0
    inner = np.array(level_sums)
    return float(np.sum(inner ** (q / p)) ** (1 / q))


def seq_norm_X1(lam, params):
    """The weighted norm: levels weighted by 2^(nu q1 (s1-s2)), entries by w1(Q) w2(Q)^(-p1/p2)."""
    p1, q1, p2 = float(params.p1), float(params.q1), float(params.p2)
    W1, W2 = w1_weight(params), w2_weight(params)
    sums, shifts = [], []
    for nu, entries in sorted(_group(lam).items()):
        terms = []
        for m, val in entries:
            if val == 0:
                continue
            terms.append(_log_cube_mass(W1, nu, m) - p1 / p2 * _log_cube_mass(W2, nu, m) + p1 * math.log(abs(val)))
        if terms:
            lev = logsumexp(terms) / p1 * q1 + nu * q1 * float(params.s1 - params.s2) * math.log(2)
            shifts.append(lev)
    if not shifts:
        return 0.0
    return float(math.exp(logsumexp(shifts) / q1))


def _plain_mixed(lam, p, q):
    levels = []
    for nu, entries in sorted(_group(lam).items()):
        vals = np.array([abs(v) for _, v in entries])
        if np.any(vals > 0):
            levels.append(np.sum(vals ** p))
    return _mixed_levels(levels, q, p)


def seq_norm_X1_tilde(lam, params):
    return _plain_mixed(lam, float(params.p1), float(params.q1))


def seq_norm_X2(lam, params):
    return _plain_mixed(lam, float(params.p2), float(params.q2))


def projection_norm(params, support):
    """Norm of the coordinate projection onto ``support`` from X1 to X1_tilde: the largest entry factor."""
    W1, W2 = w1_weight(params), w2_weight(params)
    return max(math.exp(_log_entry_factor(params, nu, m, W1, W2)) for nu, m in support)


def projection_norm_inverse(params, support):
    """Norm of the projection from X1_tilde to X1: the largest reciprocal entry factor."""
    W1, W2 = w1_weight(params), w2_weight(params)
    return max(math.exp(-_log_entry_factor(params, nu, m, W1, W2)) for nu, m in support)


# ------------------------------------------------------------ classifier


@dataclass(frozen=True)
class Asymptotics:
    """Order n^-theta rho(n^sigma) with its candidate table.

    For the third case ``terms`` holds both competing (exponent, sigma)
    pairs and theta/sigma describe the dominant one.
    """

    kind: str
    theta: object
    sigma: object
    j_star: int = None
    table: dict = None
    active: tuple = ()
    terms: tuple = ()

    def render(self):
        return f"n^(-{_fmt_value(self.theta)})*rho(n^{_fmt_value(self.sigma)})"


def _half(x):
    return Fraction(1, 2) if isinstance(x, Fraction) else 0.5


def _inv(x):
    return 1 / x


def _min_exact(*xs):
    return min(xs)


def _active_set(a, b):
    """Index set from the two exponents compared with 2 (both are >= 2)."""
    if a > 2 and b > 2:
        return (1, 2, 3, 4)
    if a > 2 and b == 2:
        return (1, 2, 3)
    if a == 2 and b > 2:
        return (2, 3, 4)
    raise WindowViolation("both index exponents equal 2: the candidate set is not defined")


def theta_table(params):
    """Part-1 candidates: {j: (theta_j, sigma_j)} and the active index set."""
    P = params
    if not (P.p2 >= 2 and P.q2 >= 2):
        raise WindowViolation(f"window violation: need p2 >= 2 and q2 >= 2, got p2={P.p2}, q2={P.q2}")
    active = _active_set(P.p2, P.q2)
    lp, lq = lambda_vec(P.p1, P.p2), lambda_vec(P.q1, P.q2)
    half = _half(P.p2)
    dd = P.delta / P.d
    table = {
        1: (dd + lp * half - lp / P.p2, 0),
        2: (P.p2 * P.delta / (2 * P.d), 0),
        3: (P.alpha + lq * half - lq / P.q2, 1),
        4: (P.q2 * P.alpha / 2, P.q2 / 2),
    }
    return table, active


def tilde_theta_table(params):
    """Part-2 candidates (linear widths) and the active index set."""
    P = params
    if not (P.p1 <= 2 <= P.p2 and P.q1 <= 2 <= P.q2):
        raise WindowViolation(
            f"window violation: need p1 <= 2 <= p2 and q1 <= 2 <= q2, got ({P.p1}, {P.q1}, {P.p2}, {P.q2})")
    pm = min(P.p2, dual_exponent(P.p1))
    qm = min(P.q2, dual_exponent(P.q1))
    active = _active_set(pm, qm)
    half = _half(P.p2)
    table = {
        1: (P.delta / P.d + min(half - 1 / P.p2, 1 / P.p1 - half), 0),
        2: (pm * P.delta / (2 * P.d), 0),
        3: (P.alpha + min(half - 1 / P.q2, 1 / P.q1 - half), 1),
        4: (qm * P.alpha / 2, qm / 2),
    }
    return table, active


def _strict_min(table, active):
    vals = {j: table[j][0] for j in active}
    best = min(vals.values())
    if all(isinstance(v, Fraction) for v in vals.values()):
        tied = [j for j, v in vals.items() if v == best]
    else:
        tied = [j for j, v in vals.items() if float(v) - float(best) <= TIE_TOL]
    if len(tied) > 1:
        raise NoStrictMinimizer(tied, table)
    return tied[0]


def classify(params, part=1):
    """The width order of the embedding for case 1, 2 or 3."""
    part = int(part)
    if part in (1, 2):
        table, active = theta_table(params) if part == 1 else tilde_theta_table(params)
        j = _strict_min(table, active)
        return Asymptotics("KOLMOGOROV" if part == 1 else "LINEAR_APPROX", table[j][0], table[j][1],
                           j, table, active)
    if part == 3:
        P = params
        if not ((P.p2 <= 2 and P.q2 <= 2) or (P.p1 >= 2 and P.q1 >= 2)):
            raise WindowViolation(
                f"window violation: need (p2 <= 2 and q2 <= 2) or (p1 >= 2 and q1 >= 2), got ({P.p1}, {P.q1}, {P.p2}, {P.q2})")
        dd = P.delta / P.d
        exact = _is_exact(dd, P.alpha)
        if (dd == P.alpha) if exact else abs(float(dd) - float(P.alpha)) <= TIE_TOL:
            raise Case3Degenerate(f"Case3Degenerate: alpha = delta/d = {_fmt_value(P.alpha)}")
        terms = ((dd, 0), (P.alpha, 1))
        theta, sigma = min(terms, key=lambda t: t[0])
        return Asymptotics("CASE3_MAX", theta, sigma, None, None, (), terms)
    raise ValueError(f"part must be 1, 2 or 3, got {part}")
