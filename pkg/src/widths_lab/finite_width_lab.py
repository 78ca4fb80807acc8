"""Numerical Kolmogorov and linear widths of mixed-norm balls and finite point sets.

Points are m x k arrays, flattened row-major to vectors of length D = m k
whenever a subspace basis (a D x n matrix) is involved.

Search strategy (both width kinds): an exchange loop keeps a working set of
points. The approximating object (subspace basis, or the factors U, V of a
rank-n operator) is fitted to the working set by L-BFGS on a log-sum-exp
smoothed max with annealed temperature. A monotone ascent over the source
ball then looks for points that are approximated worse, and these join the
working set. Reported values are exact maxima over stored points.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations, product
from math import comb

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .mixed_norm_core import (
    SpaceSpec,
    check_exponent,
    dual_attainer,
    dual_exponent,
    mixed_norm,
    norm_gradient,
)

__all__ = [
    "SearchConfig",
    "WidthEstimate",
    "GluskinPolytope",
    "ConvergenceError",
    "orthonormal_basis",
    "distance_to_subspace",
    "distances",
    "kolmogorov_width_points",
    "kolmogorov_width_ball",
    "kolmogorov_sweep",
    "linear_width_estimate",
    "operator_norm",
    "duality_gap",
    "gluskin_vertices",
    "averaged_lower_bound",
    "subadditivity_check",
    "reevaluate",
]

MAX_DIM = 64
PROJ_TOL = 1e-8
# proximal weight and round multiplier for the linear-width cutting-plane loop
PROX_WEIGHT = 1.0
LINEAR_ROUND_FACTOR = 5


class ConvergenceError(RuntimeError):
    """Projection solver hit its iteration cap; carries the best iterate."""

    def __init__(self, msg, best=None, residual=None):
        super().__init__(msg)
        self.best = best
        self.residual = residual


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 32
    outer_iters: int = 500
    rounds: int = 12
    ascent_starts: int = 16
    ascent_iters: int = 300
    tol: float = 1e-6
    temperatures: tuple = (10.0, 100.0, 1000.0)
    seed: int = 0
    workers: int = 1
    hops: int = 8
    hop_scale: float = 0.1


@dataclass
class WidthEstimate:
    kind: str
    value: float
    n: int
    method: str
    restarts: int
    seed: int
    worst_point_residual: float
    basis: np.ndarray = None
    points: np.ndarray = None
    factors: tuple = None
    p: float = None
    q: float = None
    extra: dict = field(default_factory=dict)


def _rng(seed, restart, it=0):
    return np.random.default_rng([int(seed), int(restart), int(it)])


def orthonormal_basis(B, tol=1e-10):
    """Orthonormal basis of the column span of B (rank-revealing QR via SVD)."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[1] == 0:
        return np.zeros((B.shape[0] if B.ndim == 2 else 0, 0))
    u, s, _ = np.linalg.svd(B, full_matrices=False)
    keep = s > tol * max(s.max(), 1e-300) if s.size else s > 0
    return u[:, keep]


def _random_basis(rng, D, n):
    return np.linalg.qr(rng.standard_normal((D, n)))[0][:, :n]


# ---------------------------------------------------------------- projection


def _obj_parts(R, p, q, floor=1e-150):
    """G = ||R||^q with gradient and a curvature model, batched over rows.

    The model is the Hessian with two safe modifications: for p < 2 the
    factor (p - 1) becomes 1 (the quadratic majorizer of |t|^p, which stops
    the sign-flip cycling of pure Newton near zero entries), and the negative
    rank-one column term (q < p) is dropped. Both only add curvature.
    """
    A = np.abs(R)
    Ap = A ** p
    s = Ap.sum(axis=1)
    G = np.sum(s ** (q / p), axis=1)
    U = np.sign(R) * A ** (p - 1)
    sq = np.where(s > 0, s, 1.0) ** (q / p - 1)
    grad = q * np.where(s > 0, sq, 0.0)[:, None, :] * U
    sf = np.maximum(s, floor ** min(p, 2.0))
    diag = q * max(p - 1, 1.0) * (sf ** (q / p - 1))[:, None, :] * np.maximum(A, floor) ** (p - 2)
    coef = q * (q - p) * sf ** (q / p - 2) if q > p else np.zeros_like(sf)
    return G, grad, diag, coef, U


def _objective(R, p, q):
    return np.sum(np.sum(np.abs(R) ** p, axis=1) ** (q / p), axis=1)


def _project(X, B, p, q, C0=None, tol=PROJ_TOL, max_iter=200):
    """Nearest points of span(B) to each row of X in the (p, q) mixed norm.

    X has shape (P, m, k), B is an orthonormal D x n basis. Returns
    coefficients C (P, n), distances (P,), and optimality residuals (P,).
    """
    P, m, k = X.shape
    D, n = B.shape
    Xf = X.reshape(P, D)
    p, q = float(p), float(q)
    if n == 0:
        return np.zeros((P, 0)), mixed_norm(X, p, q), np.zeros(P)
    if p == 2 and q == 2:
        C = Xf @ B
        R = Xf - C @ B.T
        return C, np.sqrt(np.sum(R * R, axis=1)), np.zeros(P)
    C = Xf @ B if C0 is None else np.array(C0, dtype=float)
    resid = np.full(P, np.inf)
    active = np.arange(P)
    Bm = B.reshape(m, k, n)
    eye = np.eye(n)
    for _ in range(max_iter):
        if active.size == 0:
            break
        R = (Xf[active] - C[active] @ B.T).reshape(-1, m, k)
        G, grad, diag, coef, U = _obj_parts(R, p, q)
        N = G ** (1 / q)
        gf = grad.reshape(-1, D)
        gc = -gf @ B
        with np.errstate(divide="ignore", invalid="ignore"):
            res = np.linalg.norm(gc, axis=1) / np.where(N > 0, q * N ** (q - 1), 1.0)
        res[N < 1e-14] = 0.0
        resid[active] = res
        todo = res > tol
        if not todo.any():
            active = active[:0]
            break
        active, G, gc, diag, coef, U = active[todo], G[todo], gc[todo], diag[todo], coef[todo], U[todo]
        Bw = B[None, :, :] * diag.reshape(-1, D)[:, :, None]
        H = np.matmul(Bw.transpose(0, 2, 1), B)
        if q > p:
            V = np.einsum("pmk,mkn->pkn", U, Bm)
            H = H + np.einsum("pk,pkn,pke->pne", coef, V, V)
        mu = 1e-12 * (np.trace(H, axis1=1, axis2=2) / n + 1e-12)
        H = H + mu[:, None, None] * eye
        try:
            step = np.linalg.solve(H, -gc[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = -gc
        slope = np.sum(gc * step, axis=1)
        bad = ~(slope < 0)
        step[bad] = -gc[bad]
        slope[bad] = -np.sum(gc[bad] ** 2, axis=1)
        t = np.ones(active.size)
        done = np.zeros(active.size, dtype=bool)
        for _ls in range(60):
            pend = np.flatnonzero(~done)
            if pend.size == 0:
                break
            Cn = C[active[pend]] + t[pend, None] * step[pend]
            Gn = _objective((Xf[active[pend]] - Cn @ B.T).reshape(-1, m, k), p, q)
            ok = Gn <= G[pend] + 1e-4 * t[pend] * slope[pend] + 4e-16 * G[pend]
            C[active[pend[ok]]] = Cn[ok]
            done[pend[ok]] = True
            t[pend[~ok]] *= 0.5
        active = active[done]
    R = (Xf - C @ B.T).reshape(P, m, k)
    return C, mixed_norm(R, p, q), resid


def _as_points(points):
    X = np.asarray(points, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim == 1:
        X = X[None, :, None]
    return X


def distances(points, basis, p, q, tol=PROJ_TOL):
    """Distances of each point (array of shape (P, m, k)) to span(basis)."""
    X = _as_points(points)
    B = orthonormal_basis(basis)
    scale = np.maximum(mixed_norm(X, p, q), 1e-300)
    _, d, res = _project(X / scale[:, None, None], B, p, q, tol=tol)
    return d * scale, res


def distance_to_subspace(x, basis, p, q, tol=PROJ_TOL, max_iter=500):
    """min over y in span(basis) of ||x - y||_{p,q}; returns (value, minimizer).

    basis is a D x n matrix (D = m k); an empty basis means the zero subspace.
    Raises ConvergenceError when the optimality residual stays above tol.
    """
    check_exponent(p, "p")
    check_exponent(q, "q")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m, k = x.shape
    basis = np.asarray(basis, dtype=float).reshape(m * k, -1)
    B = orthonormal_basis(basis)
    scale = float(mixed_norm(x, p, q))
    if scale == 0:
        return 0.0, np.zeros_like(x)
    C, d, res = _project((x / scale)[None], B, p, q, tol=tol, max_iter=max_iter)
    y = (C @ B.T).reshape(m, k) * scale
    if res[0] > tol:
        raise ConvergenceError(f"projection residual {res[0]:.3g} > {tol}", best=y, residual=float(res[0]))
    return float(d[0] * scale), y


# ----------------------------------------------------------- smoothed fits


def _fit_subspace(X3, B, C, p, q, temps, iters):
    """Joint L-BFGS over (B, C) on the smoothed max of ||x_i - B c_i||."""
    P, m, k = X3.shape
    shape, D = (m, k), m * k
    X = X3.reshape(P, D)
    n = B.shape[1]

    def split(z):
        return z[: D * n].reshape(D, n), z[D * n:].reshape(P, n)

    for T in temps:
        def fun(z):
            Bz, Cz = split(z)
            R = X - Cz @ Bz.T
            N = mixed_norm(R.reshape(P, *shape), p, q)
            f = logsumexp(T * N) / T
            w = np.exp(T * N - T * f)
            g = norm_gradient(R.reshape(P, *shape), p, q).reshape(P, D) * w[:, None]
            return f, np.concatenate([(-g.T @ Cz).ravel(), (-g @ Bz).ravel()])

        res = minimize(fun, np.concatenate([B.ravel(), C.ravel()]), jac=True, method="L-BFGS-B",
                       options={"maxiter": iters, "gtol": 1e-12, "ftol": 1e-15})
        B, C = split(res.x)
        Q, Rq = np.linalg.qr(B)
        B, C = Q, C @ Rq.T
    return B, C


def _fit_operator(X3, U, V, p, q, temps, iters, center=None, prox=0.0):
    """Joint L-BFGS over (U, V) on the smoothed max of ||x_i - U V^T x_i||.

    With ``center`` the objective gets a proximal term prox/2 * ||(U, V) - center||^2,
    which keeps the cutting-plane iterates near the best operator so far.
    """
    P, m, k = X3.shape
    shape, D = (m, k), m * k
    X = X3.reshape(P, D)
    n = U.shape[1]
    U0, V0 = center if center is not None else (U, V)
    for T in temps:
        def fun(z):
            Uz, Vz = z[: D * n].reshape(D, n), z[D * n:].reshape(D, n)
            A = X @ Vz
            R = X - A @ Uz.T
            N = mixed_norm(R.reshape(P, *shape), p, q)
            f = logsumexp(T * N) / T
            w = np.exp(T * N - T * f)
            g = norm_gradient(R.reshape(P, *shape), p, q).reshape(P, D) * w[:, None]
            dU, dV = Uz - U0, Vz - V0
            f = f + 0.5 * prox * (np.sum(dU ** 2) + np.sum(dV ** 2))
            return f, np.concatenate([(-g.T @ A + prox * dU).ravel(), (-X.T @ (g @ Uz) + prox * dV).ravel()])

        res = minimize(fun, np.concatenate([U.ravel(), V.ravel()]), jac=True, method="L-BFGS-B",
                       options={"maxiter": iters, "gtol": 1e-12, "ftol": 1e-15})
        U, V = res.x[: D * n].reshape(D, n), res.x[D * n:].reshape(D, n)
    return U, V


# ------------------------------------------------------------------ ascent


def _normalize(X, p, q):
    s = mixed_norm(X, p, q)
    return X / np.where(s > 0, s, 1.0)[:, None, None]


def _ascent_subspace(starts, B, src, dst, iters, tol):
    """Monotone ascent of x -> dist(x, span B) over the unit ball of src.

    Each step takes the norming functional f of the residual (f annihilates
    span B at the nearest point) and jumps to the src-ball point maximizing
    <f, x>. Returns points, distances and relative first-order gaps.
    """
    X = _normalize(starts, src.p, src.q)
    C, d, _ = _project(X, B, dst.p, dst.q)
    gap = np.full(len(X), np.inf)
    for _ in range(iters):
        R = X - (C @ B.T).reshape(X.shape)
        f = norm_gradient(R, dst.p, dst.q)
        Xn = dual_attainer(f, src.p, src.q)
        fx = np.sum(f * Xn, axis=(1, 2))
        gap = np.where(fx > 0, (fx - d) / np.maximum(fx, 1e-300), 0.0)
        if np.all(gap <= tol):
            break
        move = gap > tol
        Cn, dn, _ = _project(Xn[move], B, dst.p, dst.q, C0=C[move])
        up = dn >= d[move]
        idx = np.flatnonzero(move)[up]
        X[idx], C[idx], d[idx] = Xn[move][up], Cn[up], dn[up]
        stuck = np.flatnonzero(move)[~up]
        gap[stuck] = np.minimum(gap[stuck], tol)
    return X, d, np.maximum(gap, 0.0)


def _ascent_operator(starts, T, src, dst, iters, tol):
    """Monotone ascent of ||T x||_dst over the unit ball of src (power-type iteration)."""
    P = len(starts)
    m, k = starts.shape[1:]
    X = _normalize(starts, src.p, src.q)
    val = mixed_norm((X.reshape(P, -1) @ T.T).reshape(P, m, k), dst.p, dst.q)
    gap = np.full(P, np.inf)
    for _ in range(iters):
        Y = (X.reshape(P, -1) @ T.T).reshape(P, m, k)
        f = norm_gradient(Y, dst.p, dst.q)
        z = (f.reshape(P, -1) @ T).reshape(P, m, k)
        zn = mixed_norm(z, dual_exponent(float(src.p)), dual_exponent(float(src.q)))
        gap = np.where(zn > 0, (zn - val) / np.maximum(zn, 1e-300), 0.0)
        if np.all(gap <= tol):
            break
        Xn = dual_attainer(z, src.p, src.q)
        vn = mixed_norm((Xn.reshape(P, -1) @ T.T).reshape(P, m, k), dst.p, dst.q)
        up = vn >= val
        X[up], val[up] = Xn[up], vn[up]
        gap[~up] = np.minimum(gap[~up], tol)
    return X, val, np.maximum(gap, 0.0)


def _unit_vectors(m, k):
    return np.eye(m * k).reshape(m * k, m, k)


def _random_gluskin(rng, m, k, count):
    out = np.zeros((count, m, k))
    for c in range(count):
        r, l = rng.integers(1, m + 1), rng.integers(1, k + 1)
        rows = rng.choice(m, r, replace=False)
        cols = rng.choice(k, l, replace=False)
        s1 = rng.choice([-1.0, 1.0], r)
        s2 = rng.choice([-1.0, 1.0], l)
        out[c][np.ix_(rows, cols)] = np.outer(s1, s2)
    return out


def _start_pool(rng, m, k, cfg):
    g = _random_gluskin(rng, m, k, max(cfg.ascent_starts // 2, 1))
    r = rng.standard_normal((cfg.ascent_starts, m, k))
    return np.concatenate([g, r])


def _dedupe(X, tol=1e-6):
    keep = []
    flat = X.reshape(len(X), -1)
    for i in range(len(X)):
        if all(min(np.abs(flat[i] - flat[j]).max(), np.abs(flat[i] + flat[j]).max()) > tol for j in keep):
            keep.append(i)
    return X[keep]


# ------------------------------------------------------------ Kolmogorov


def _check_specs(src, dst, n):
    if (src.m, src.k) != (dst.m, dst.k):
        raise ValueError("source and target must share (m, k)")
    if src.dim > MAX_DIM:
        raise ValueError(f"m k = {src.dim} exceeds the desk-scale cap {MAX_DIM}")
    if not 0 <= int(n):
        raise ValueError("n must be nonnegative")


def _points_restart(args):
    X, n, p, q, cfg, restart, B0 = args
    P, m, k = X.shape
    D = m * k
    rng = _rng(cfg.seed, restart)
    B = B0 if (B0 is not None and restart == 0) else _random_basis(rng, D, n)
    C, d, _ = _project(X, B, p, q)
    per = max(cfg.outer_iters // len(cfg.temperatures), 1)
    B, C = _fit_subspace(X, B, C, p, q, cfg.temperatures, per)
    B = orthonormal_basis(B)
    C, d, res = _project(X, B, p, q, max_iter=500)
    return float(d.max()), B, float(res.max())


def _pmap(fn, tasks, workers):
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def kolmogorov_width_points(points, n, p, q, cfg=SearchConfig(), warm=None):
    """Estimate d_n(conv(points), l_{p,q}): the best n-dim subspace for the exact max distance."""
    check_exponent(p, "p")
    check_exponent(q, "q")
    X = _as_points(points)
    P, m, k = X.shape
    n = int(n)
    if m * k > MAX_DIM:
        raise ValueError(f"m k = {m * k} exceeds the desk-scale cap {MAX_DIM}")
    if n >= m * k:
        return WidthEstimate("KOLMOGOROV", 0.0, n, "MULTISTART_ALTERNATE", 0, cfg.seed, 0.0,
                             basis=np.eye(m * k), points=X, p=p, q=q)
    if n == 0:
        return WidthEstimate("KOLMOGOROV", float(mixed_norm(X, p, q).max()), 0, "MULTISTART_ALTERNATE",
                             0, cfg.seed, 0.0, basis=np.zeros((m * k, 0)), points=X, p=p, q=q)
    tasks = [(X, n, p, q, cfg, r, warm) for r in range(cfg.restarts)]
    results = _pmap(_points_restart, tasks, cfg.workers)
    best = min(range(len(results)), key=lambda i: (results[i][0], i))
    val, B, res = results[best]
    return WidthEstimate("KOLMOGOROV", val, n, "MULTISTART_ALTERNATE", cfg.restarts, cfg.seed, res,
                         basis=B, points=X, p=p, q=q, extra={"restart": best})


def _initial_working_set(rng, src, cfg):
    m, k = src.m, src.k
    E = _unit_vectors(m, k)
    extra = _start_pool(rng, m, k, cfg)
    return _normalize(np.concatenate([E, extra]), src.p, src.q)


def _ball_restart(args):
    src, dst, n, cfg, restart, B0, S0 = args
    m, k = src.m, src.k
    D = m * k
    rng = _rng(cfg.seed, restart)
    S = _initial_working_set(rng, src, cfg)
    if S0 is not None:
        S = np.concatenate([S, S0])
    B = B0 if (B0 is not None and restart == 0) else _random_basis(rng, D, n)
    per = max(cfg.outer_iters // len(cfg.temperatures), 1)
    best = None
    for rnd in range(cfg.rounds):
        if rnd > 0 or B0 is None or restart != 0:
            C, _, _ = _project(S, B, dst.p, dst.q)
            B, _ = _fit_subspace(S, B, C, dst.p, dst.q, cfg.temperatures, per)
            B = orthonormal_basis(B)
        C, dS, _ = _project(S, B, dst.p, dst.q)
        order = np.argsort(-dS)
        starts = np.concatenate([S[order[: cfg.ascent_starts]], _start_pool(_rng(cfg.seed, restart, rnd + 1), m, k, cfg)])
        W, dW, gap = _ascent_subspace(starts, B, src, dst, cfg.ascent_iters, cfg.tol)
        top = np.argmax(dW)
        value = max(float(dW[top]), float(dS.max()))
        cand = (value, B, np.concatenate([S, W[top:top + 1]]), float(gap[top]))
        if best is None or cand[0] < best[0]:
            best = cand
        if dW[top] <= dS.max() * (1 + 1e-4) + 1e-12:
            break
        new = W[np.argsort(-dW)[: max(cfg.ascent_starts // 2, 1)]]
        S = np.concatenate([S, _dedupe(new)])
    value, B, pts, gap = best
    C, d, res = _project(pts, B, dst.p, dst.q, max_iter=500)
    return float(d.max()), B, pts, max(gap, float(res.max()) if res.size else 0.0)


def kolmogorov_width_ball(src, dst, n, cfg=SearchConfig(), warm=None, warm_points=None):
    """Estimate d_n(B_src, l_dst) for mixed-norm unit balls on the same m x k grid.

    The result stores the subspace and the worst points found; its value is
    the exact maximum of their distances to that subspace.
    """
    _check_specs(src, dst, n)
    n = int(n)
    m, k = src.m, src.k
    if n >= m * k:
        return WidthEstimate("KOLMOGOROV", 0.0, n, "MULTISTART_ALTERNATE", 0, cfg.seed, 0.0,
                             basis=np.eye(m * k), points=_unit_vectors(m, k), p=dst.p, q=dst.q)
    if n == 0:
        val, pts, gap = _ball_norm_radius(src, dst, cfg)
        return WidthEstimate("KOLMOGOROV", val, 0, "MULTISTART_ALTERNATE", 1, cfg.seed, gap,
                             basis=np.zeros((m * k, 0)), points=pts, p=dst.p, q=dst.q)
    tasks = [(src, dst, n, cfg, r, warm, warm_points) for r in range(cfg.restarts)]
    results = _pmap(_ball_restart, tasks, cfg.workers)
    best = min(range(len(results)), key=lambda i: (results[i][0], i))
    val, B, pts, gap = results[best]
    return WidthEstimate("KOLMOGOROV", val, n, "MULTISTART_ALTERNATE", cfg.restarts, cfg.seed, gap,
                         basis=B, points=pts, p=dst.p, q=dst.q, extra={"restart": best})


def _ball_norm_radius(src, dst, cfg):
    """sup of ||x||_dst over the unit ball of src (the n = 0 width)."""
    m, k = src.m, src.k
    rng = _rng(cfg.seed, 0)
    starts = _initial_working_set(rng, src, cfg)
    X, v, gap = _ascent_operator(starts, np.eye(m * k), src, dst, cfg.ascent_iters, cfg.tol)
    top = int(np.argmax(v))
    return float(v[top]), X[top:top + 1], float(gap[top])


def kolmogorov_sweep(src, dst, ns, cfg=SearchConfig()):
    """Estimates over increasing n, each warm-started from the previous subspace plus one direction.

    Monotonicity is enforced: if a larger n would report a larger value, the
    previous subspace (a member of the larger class) and its points are kept.
    """
    out = []
    prev = None
    for n in sorted(int(v) for v in ns):
        warm = warm_pts = None
        if prev is not None and 0 < n < src.dim and prev.basis is not None:
            rng = _rng(cfg.seed, 10_000 + n)
            extra = rng.standard_normal((src.dim, n - prev.basis.shape[1]))
            warm = np.linalg.qr(np.concatenate([prev.basis, extra], axis=1))[0][:, :n]
            warm_pts = prev.points
        est = kolmogorov_width_ball(src, dst, n, cfg, warm=warm, warm_points=warm_pts)
        if prev is not None and est.value > prev.value:
            est = replace(prev, n=n, extra={**prev.extra, "inherited_from": prev.n})
        out.append(est)
        prev = est
    return out


def reevaluate(est):
    """Recompute a Kolmogorov estimate as the max distance of its stored points to its subspace."""
    if est.basis is None or est.points is None:
        raise ValueError("estimate carries no subspace/points")
    if est.basis.shape[1] >= est.points[0].size:
        return 0.0
    d, _ = distances(est.points, est.basis, est.p, est.q)
    return float(d.max())


# ----------------------------------------------------------------- linear


def operator_norm(T, src, dst, cfg=SearchConfig(), restart=0):
    """sup over the src unit ball of ||T x||_dst, T acting on flattened m x k arrays."""
    rng = _rng(cfg.seed, restart, 99)
    starts = _initial_working_set(rng, src, cfg)
    X, v, gap = _ascent_operator(starts, np.asarray(T, dtype=float), src, dst, cfg.ascent_iters, cfg.tol)
    top = int(np.argmax(v))
    return float(v[top]), X[top], float(gap[top])


def _linear_loop(src, dst, cfg, S, U, V, restart, tag, anneal):
    """Proximal cutting-plane loop from (U, V); returns the best (value, U, V, x, gap) and the grown set."""
    m, k = src.m, src.k
    D = m * k
    per = max(cfg.outer_iters // len(cfg.temperatures), 1)
    temps = cfg.temperatures if anneal else cfg.temperatures[-1:]
    U, V = _fit_operator(S, U, V, dst.p, dst.q, temps, per)
    best = None
    eye = np.eye(D)
    for rnd in range(LINEAR_ROUND_FACTOR * cfg.rounds):
        if rnd > 0:
            U, V = _fit_operator(S, best[1], best[2], dst.p, dst.q, cfg.temperatures[-1:], per,
                                 center=(best[1], best[2]), prox=PROX_WEIGHT)
        T = eye - U @ V.T
        vS = mixed_norm((S.reshape(len(S), D) @ T.T).reshape(S.shape), dst.p, dst.q)
        order = np.argsort(-vS)
        fresh = _start_pool(_rng(cfg.seed, restart, 1000 * tag + rnd + 1), m, k, cfg)
        W, vW, gap = _ascent_operator(np.concatenate([S[order[: cfg.ascent_starts]], fresh]), T, src, dst,
                                      cfg.ascent_iters, cfg.tol)
        top = int(np.argmax(vW))
        value = max(float(vW[top]), float(vS.max()))
        if best is None or value < best[0]:
            best = (value, U.copy(), V.copy(), W[top], float(gap[top]))
        if vW[top] <= vS.max() * (1 + 1e-4) + 1e-12:
            break
        S = np.concatenate([S, _dedupe(W[np.argsort(-vW)[: max(cfg.ascent_starts // 2, 1)]])])
    return best, S


def _linear_restart(args):
    src, dst, n, cfg, restart = args
    rng = _rng(cfg.seed, restart)
    S = _initial_working_set(rng, src, cfg)
    Q = _random_basis(rng, src.dim, n)
    best, S = _linear_loop(src, dst, cfg, S, Q.copy(), Q.copy(), restart, 0, True)
    # basin hopping: the rank-n factorization has spurious local minima
    for h in range(cfg.hops):
        U = best[1] + cfg.hop_scale * rng.standard_normal(best[1].shape)
        V = best[2] + cfg.hop_scale * rng.standard_normal(best[2].shape)
        cand, S = _linear_loop(src, dst, cfg, S, U, V, restart, h + 1, False)
        if cand[0] < best[0]:
            best = cand
    return best


def linear_width_estimate(src, dst, n, cfg=SearchConfig()):
    """Estimate lambda_n(B_src, l_dst) = inf over rank-n A of ||I - A|| from src to dst."""
    _check_specs(src, dst, n)
    n = int(n)
    m, k = src.m, src.k
    D = m * k
    if n >= D:
        return WidthEstimate("LINEAR", 0.0, n, "OPERATOR_DESCENT", 0, cfg.seed, 0.0,
                             factors=(np.eye(D), np.eye(D)), p=dst.p, q=dst.q)
    if n == 0:
        val, x, gap = operator_norm(np.eye(D), src, dst, cfg)
        return WidthEstimate("LINEAR", val, 0, "OPERATOR_DESCENT", 1, cfg.seed, gap,
                             factors=(np.zeros((D, 0)), np.zeros((D, 0))), points=x[None], p=dst.p, q=dst.q)
    tasks = [(src, dst, n, cfg, r) for r in range(cfg.restarts)]
    results = _pmap(_linear_restart, tasks, cfg.workers)
    best = min(range(len(results)), key=lambda i: (results[i][0], i))
    val, U, V, x, gap = results[best]
    extra = {"restart": best}
    if float(src.p) == float(src.q) == float(dst.p) == float(dst.q) == 2:
        extra["svd_value"] = 1.0
    return WidthEstimate("LINEAR", val, n, "OPERATOR_DESCENT", cfg.restarts, cfg.seed, gap,
                         factors=(U, V), points=x[None], p=dst.p, q=dst.q, extra=extra)


def duality_gap(src, dst, n, cfg=SearchConfig()):
    """Relative gap between lambda_n(B_src, l_dst) and lambda_n(B_{dst'}, l_{src'}).

    The two are equal because ||I - A|| from src to dst equals ||I - A^T|| from dst' to src'.
    """
    a = linear_width_estimate(src, dst, n, cfg).value
    b = linear_width_estimate(dst.dual(), src.dual(), n, cfg).value
    top = max(a, b)
    return 0.0 if top == 0 else abs(a - b) / top


# ----------------------------------------------------------------- Gluskin


@dataclass(frozen=True)
class GluskinPolytope:
    m: int
    k: int
    r: int
    l: int
    vertices: np.ndarray


def gluskin_vertices(m, k, r, l, budget=10 ** 6):
    """All distinct rank-one +-1 patterns on an r x l support of an m x k grid."""
    if not (1 <= r <= m and 1 <= l <= k):
        raise ValueError(f"need 1 <= r <= m and 1 <= l <= k, got m={m}, k={k}, r={r}, l={l}")
    count = comb(m, r) * comb(k, l) * 2 ** (r + l - 1)
    if count > budget:
        raise ValueError(f"{count} vertices exceed the budget {budget}")
    out = np.zeros((count, m, k))
    c = 0
    for rows in combinations(range(m), r):
        for cols in combinations(range(k), l):
            for s1 in product((1.0, -1.0), repeat=r - 1):
                e1 = np.array((1.0,) + s1)
                for e2 in product((1.0, -1.0), repeat=l):
                    out[c][np.ix_(rows, cols)] = np.outer(e1, e2)
                    c += 1
    return GluskinPolytope(m, k, r, l, out)


def _gamma_samples(poly, samples, rng):
    m, k, r, l = poly.m, poly.k, poly.r, poly.l
    out = np.zeros((samples, m, k))
    for s in range(samples):
        s1, s2 = rng.permutation(m), rng.permutation(k)
        e1, e2 = rng.choice([-1.0, 1.0], m), rng.choice([-1.0, 1.0], k)
        out[s][np.ix_(s1[:r], s2[:l])] = np.outer(e1[:r], e2[:l])
    return out


def averaged_lower_bound(poly, basis, p2, q2, samples, seed=0):
    """(mean over sampled group elements of dist(gamma(e), Y)^q2)^(1/q2) for the given Y."""
    if int(samples) < 1:
        raise ValueError("samples must be >= 1")
    X = _gamma_samples(poly, int(samples), _rng(seed, 0, 7))
    d, _ = distances(X, np.asarray(basis, dtype=float).reshape(poly.m * poly.k, -1), p2, q2)
    return float(np.mean(d ** float(q2)) ** (1 / float(q2)))


def subadditivity_check(estimates, joint):
    """sum of block values minus the joint value; estimates are (n_k, value_k) pairs."""
    n_joint, v_joint = joint
    if sum(int(nk) for nk, _ in estimates) != int(n_joint):
        raise ValueError("block budgets do not add up to the joint budget")
    return float(sum(v for _, v in estimates) - v_joint)
