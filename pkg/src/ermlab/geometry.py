"""Convex indexing bodies and their projection / support / intersection oracles.

A body ``T`` indexes the linear function class ``{<t, .> : t in T}``.  All
supported bodies are centrally symmetric and contain the origin, so the
difference class is ``2T`` and star-shapedness around 0 holds for free.

Supported kinds
---------------
``l1_ball``, ``l2_ball``, ``linf_ball``
    Vectors in R^d; projections and support functions are closed form, the
    support over an intersection with a Euclidean ball is solved exactly by
    breakpoint searches.
``maxnorm_ball``
    Flattened p x q matrices with factorization norm
    ``||A||_max = min_{A=UV^T} ||U||_{2->inf} ||V||_{2->inf}``.  The body is
    handled through its sign-atom hull ``conv{u v^T}`` and the Grothendieck
    sandwich ``conv(atoms) <= B_max <= kG * conv(atoms)``; no Euclidean
    projection is attempted for it.  Its natural L2 metric is the Frobenius
    norm scaled by 1/sqrt(pq), so atoms have unit L2 norm.
"""

from dataclasses import dataclass

import numpy as np

from .rng import derive_rng

KINDS = ("l1_ball", "l2_ball", "linf_ball", "maxnorm_ball")

DEFAULT_KG = 1.783
DYKSTRA_MAX_ITER = 10_000
DYKSTRA_TOL = 1e-8


class DimensionMismatchError(ValueError):
    pass


class UnsupportedBodyError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    """Iterative scheme hit its cap; carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class ConvexBody:
    """Symmetric convex body, the index set of a linear class.

    Parameters
    ----------
    kind : str
        One of ``KINDS``.
    dim : int or (int, int)
        Ambient dimension; a pair (p, q) for ``maxnorm_ball`` (vectors are
        flattened p x q matrices).
    radius : float
        Scale factor of the unit body.
    kG : float
        Grothendieck sandwich constant, used by ``maxnorm_ball`` only.
    """

    kind: str
    dim: object
    radius: float = 1.0
    kG: float = DEFAULT_KG

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedBodyError(f"unknown body kind {self.kind!r}")
        if self.kind == "maxnorm_ball":
            p, q = self.dim
            if p < 1 or q < 1:
                raise ValueError("maxnorm dims must be positive")
            object.__setattr__(self, "dim", (int(p), int(q)))
        else:
            if not (isinstance(self.dim, (int, np.integer)) and self.dim >= 1):
                raise ValueError("dim must be a positive integer")
            object.__setattr__(self, "dim", int(self.dim))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @property
    def ambient_dim(self) -> int:
        if self.kind == "maxnorm_ball":
            return self.dim[0] * self.dim[1]
        return self.dim

    @property
    def matrix_shape(self):
        if self.kind != "maxnorm_ball":
            raise UnsupportedBodyError("matrix_shape only applies to maxnorm_ball")
        return self.dim

    @property
    def metric_scale(self) -> float:
        """Ambient-Euclidean norm of a unit-L2 element (sqrt(pq) for maxnorm)."""
        if self.kind == "maxnorm_ball":
            p, q = self.dim
            return float(np.sqrt(p * q))
        return 1.0

    @property
    def l2_radius(self) -> float:
        """max L2 norm over the body; exact for every kind."""
        if self.kind in ("l1_ball", "l2_ball"):
            return self.radius
        if self.kind == "linf_ball":
            return self.radius * float(np.sqrt(self.dim))
        # |(UV^T)_ij| <= 1 when rows of U, V are unit, and sign atoms attain it.
        return self.radius

    @property
    def l2_diameter(self) -> float:
        return 2.0 * self.l2_radius

    def scaled(self, c: float) -> "ConvexBody":
        return ConvexBody(self.kind, self.dim, self.radius * c, self.kG)

    def l2_norm(self, v) -> float:
        return float(np.linalg.norm(np.asarray(v, dtype=float))) / self.metric_scale

    def atom_oracle(self) -> "AtomOracle":
        if self.kind != "maxnorm_ball":
            raise UnsupportedBodyError("atom oracle only exists for maxnorm_ball")
        p, q = self.dim
        return AtomOracle(p=p, q=q, kG=self.kG)

    def _check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.ambient_dim:
            raise DimensionMismatchError(
                f"expected length {self.ambient_dim}, got {x.size}"
            )
        return x


@dataclass(frozen=True)
class AtomOracle:
    """Linear maximization over the sign atoms {u v^T : u in {+-1}^p, v in {+-1}^q}.

    Exact by enumeration over the smaller sign cube while p + q <= brute_cap;
    otherwise alternating sign maximization with random restarts (a local
    maximizer only).
    """

    p: int
    q: int
    kG: float = DEFAULT_KG
    brute_cap: int = 22
    restarts: int = 20

    def max_atom(self, G, seed=0):
        """Return (value, u, v) maximizing u^T G v over sign vectors."""
        G = np.asarray(G, dtype=float).reshape(self.p, self.q)
        if self.p + self.q <= self.brute_cap:
            return self._max_atom_brute(G)
        return self._max_atom_alternating(G, seed)

    def _max_atom_brute(self, G):
        # Enumerate the smaller side; the other side's optimum is a sign map.
        transpose = self.q < self.p
        M = G.T if transpose else G
        m = M.shape[0]
        # First coordinate pinned to +1: (u, v) and (-u, -v) tie.
        codes = np.arange(2 ** (m - 1), dtype=np.uint64)
        bits = (codes[:, None] >> np.arange(m - 1, dtype=np.uint64)) & 1
        U = np.empty((codes.size, m))
        U[:, 0] = 1.0
        U[:, 1:] = 1.0 - 2.0 * bits
        scores = np.abs(U @ M).sum(axis=1)
        best = int(np.argmax(scores))
        u = U[best]
        v = np.sign(M.T @ u)
        v[v == 0] = 1.0
        value = float(u @ M @ v)
        if transpose:
            u, v = v, u
        return value, u, v

    def _max_atom_alternating(self, G, seed):
        best = (-np.inf, None, None)
        for j in range(self.restarts):
            rng = derive_rng(seed, "atom-restart", j)
            u = np.sign(rng.standard_normal(self.p))
            u[u == 0] = 1.0
            val_prev = -np.inf
            for _ in range(200):
                v = np.sign(G.T @ u)
                v[v == 0] = 1.0
                u = np.sign(G @ v)
                u[u == 0] = 1.0
                val = float(u @ G @ v)
                if val <= val_prev + 1e-12:
                    break
                val_prev = val
            if val_prev > best[0]:
                best = (val_prev, u.copy(), v.copy())
        return best


# ---------------------------------------------------------------------------
# projections


def _project_l1(x, radius):
    norm1 = np.abs(x).sum()
    if norm1 <= radius:
        return x.copy()
    a = np.sort(np.abs(x))[::-1]
    cum = np.cumsum(a)
    js = np.arange(1, a.size + 1)
    rho = np.max(np.nonzero(a > (cum - radius) / js)[0]) + 1
    theta = (cum[rho - 1] - radius) / rho
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def project(body: ConvexBody, x):
    """Euclidean projection onto the body (exact; rejects maxnorm_ball)."""
    x = body._check_vector(x)
    r = body.radius
    if body.kind == "l2_ball":
        n = np.linalg.norm(x)
        return x if n <= r else x * (r / n)
    if body.kind == "linf_ball":
        return np.clip(x, -r, r)
    if body.kind == "l1_ball":
        return _project_l1(x, r)
    raise UnsupportedBodyError(
        "maxnorm_ball has no projection oracle; use the factorized solver's "
        "feasibility map instead"
    )


def membership(body: ConvexBody, x, tol: float = 1e-9) -> bool:
    """True iff gauge(x) <= 1 + tol."""
    x = body._check_vector(x)
    r = body.radius
    if body.kind == "l1_ball":
        return np.abs(x).sum() <= r * (1.0 + tol)
    if body.kind == "l2_ball":
        return np.linalg.norm(x) <= r * (1.0 + tol)
    if body.kind == "linf_ball":
        return np.abs(x).max(initial=0.0) <= r * (1.0 + tol)
    return maxnorm_gauge(x.reshape(body.matrix_shape)) <= r * (1.0 + tol)


def maxnorm_gauge(A) -> float:
    """Factorization norm ||A||_max via its semidefinite formulation.

    min t  s.t.  [[W1, A], [A^T, W2]] >> 0,  diag(W1) <= t,  diag(W2) <= t.
    Desk-scale only; requires cvxpy.
    """
    import cvxpy as cp

    A = np.asarray(A, dtype=float)
    p, q = A.shape
    W1 = cp.Variable((p, p), symmetric=True)
    W2 = cp.Variable((q, q), symmetric=True)
    t = cp.Variable()
    M = cp.bmat([[W1, cp.Constant(A)], [cp.Constant(A.T), W2]])
    prob = cp.Problem(
        cp.Minimize(t), [M >> 0, cp.diag(W1) <= t, cp.diag(W2) <= t]
    )
    prob.solve()
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise ConvergenceError(f"max-norm SDP ended with status {prob.status}")
    return float(t.value)


# ---------------------------------------------------------------------------
# support functions


def support(body: ConvexBody, g):
    """sup_{t in body} <g, t> together with an attaining point.

    For maxnorm_ball the value is the sandwich upper bound
    kG * radius * max_{atoms} <g, uv^T>, attained on the scaled atom hull.
    """
    g = body._check_vector(g)
    r = body.radius
    if body.kind == "l1_ball":
        i = int(np.argmax(np.abs(g)))
        t = np.zeros_like(g)
        t[i] = r * np.sign(g[i]) if g[i] != 0 else r
        return float(r * np.abs(g).max(initial=0.0)), t
    if body.kind == "l2_ball":
        n = np.linalg.norm(g)
        if n == 0:
            return 0.0, np.zeros_like(g)
        return float(r * n), r * g / n
    if body.kind == "linf_ball":
        s = np.sign(g)
        s[s == 0] = 1.0
        return float(r * np.abs(g).sum()), r * s
    oracle = body.atom_oracle()
    value, u, v = oracle.max_atom(g.reshape(body.matrix_shape))
    t = body.kG * r * np.outer(u, v).reshape(-1)
    return float(body.kG * r * value), t


def _support_intersection_l1(radius, r_ball, g):
    """Exact sup over B1(radius) ∩ {||t||_2 <= r_ball} by KKT breakpoints.

    The optimizer is either the Euclidean-ball point r*g/||g|| (when its l1
    norm is slack), the min-norm point of the argmax face of the l1 ball
    (when that face reaches inside the Euclidean ball), or the member of the
    soft-threshold family t(theta) ~ (|g| - theta)_+ with both constraints
    active; theta is bracketed on the breakpoint grid of sorted |g| and then
    solved in closed form on the bracketed segment.
    """
    a = np.abs(g)
    norm2 = np.linalg.norm(a)
    if norm2 == 0:
        return 0.0, np.zeros_like(g)
    a1 = float(a.max())
    # l2 constraint slack at the ball maximizer
    if r_ball * a.sum() <= radius * norm2:
        t = r_ball * g / norm2
        return float(r_ball * norm2), t
    # l1-only optimum: min-norm point of the argmax face is l2-feasible
    maxset = a >= a1 * (1.0 - 1e-12)
    m = int(maxset.sum())
    if r_ball * np.sqrt(m) >= radius:
        t = np.zeros_like(g)
        t[maxset] = (radius / m) * np.where(g[maxset] != 0, np.sign(g[maxset]), 1.0)
        return float(radius * a1), t

    # both constraints active: bracket phi(theta) = r*||s||_1/||s||_2 = radius
    asort = np.sort(a)[::-1]
    thetas = np.append(asort, 0.0)            # descending
    S = np.maximum(a[None, :] - thetas[:, None], 0.0)
    S1 = S.sum(axis=1)
    S2n = np.linalg.norm(S, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = r_ball * S1 / S2n
    phi[S2n == 0] = r_ball * np.sqrt(m)       # limit at the top breakpoint
    # phi is nondecreasing along the (descending) theta list; find the
    # first breakpoint at or above the target ratio
    idx = int(np.argmax(phi >= radius))
    lo_t, hi_t = float(thetas[idx]), float(thetas[idx - 1])

    theta = None
    k = int((a > lo_t + 1e-15 * a1).sum()) or int((a >= hi_t - 1e-15 * a1).sum())
    act = np.sort(a)[::-1][:k]
    A1, A2 = float(act.sum()), float(act @ act)
    R2, r2 = radius**2, r_ball**2
    c2 = k * (r2 * k - R2)
    c1 = 2.0 * A1 * (R2 - r2 * k)
    c0 = r2 * A1**2 - R2 * A2
    roots = []
    if abs(c2) > 1e-300:
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc >= 0:
            sq = np.sqrt(disc)
            roots = [(-c1 - sq) / (2.0 * c2), (-c1 + sq) / (2.0 * c2)]
    elif abs(c1) > 1e-300:
        roots = [-c0 / c1]
    for cand in roots:
        if lo_t - 1e-12 * a1 <= cand <= hi_t + 1e-12 * a1:
            cand = min(max(cand, lo_t), hi_t)
            s = np.maximum(a - cand, 0.0)
            resid = abs(r_ball * s.sum() - radius * np.linalg.norm(s))
            if resid <= 1e-9 * max(1.0, radius * np.linalg.norm(s)):
                theta = cand
                break
    if theta is None:
        # bisection fallback on the nonincreasing ratio, within the bracket
        for _ in range(200):
            mid = 0.5 * (lo_t + hi_t)
            s = np.maximum(a - mid, 0.0)
            ratio = r_ball * s.sum() / max(np.linalg.norm(s), 1e-300)
            if ratio > radius:
                lo_t = mid
            else:
                hi_t = mid
        theta = 0.5 * (lo_t + hi_t)

    s = np.maximum(a - theta, 0.0)
    sn = np.linalg.norm(s)
    t = np.sign(g) * (r_ball * s / sn)
    return float(r_ball * float(a @ s) / sn), t


def _support_intersection_linf(radius, r_ball, g):
    """Exact sup over the box [-radius, radius]^d ∩ r_ball*B2 (waterfilling).

    The optimizer is t = sign(g) * min(mu*|g|, radius) with the water level
    mu solving ||t||_2 = r_ball when both constraints bite; the level is
    bracketed on the breakpoint grid radius/|g|_(k) and solved in closed
    form on the bracketed segment.
    """
    a = np.abs(g)
    norm2 = np.linalg.norm(a)
    d = a.size
    if norm2 == 0:
        return 0.0, np.zeros_like(g)
    sgn = np.sign(g)
    sgn[sgn == 0] = 1.0
    support_mask = a > 0
    nnz = int(support_mask.sum())
    if radius * np.sqrt(nnz) <= r_ball:
        # the saturated box point on the support of g is l2-feasible
        t = radius * sgn * support_mask
        return float(radius * a.sum()), t
    if r_ball * a.max() <= radius * norm2:
        t = r_ball * g / norm2
        return float(r_ball * norm2), t

    asort = np.sort(a[support_mask])[::-1]
    mus = radius / asort                      # ascending breakpoints
    clipped = np.minimum(mus[:, None] * a[None, :], radius)
    f = (clipped**2).sum(axis=1)              # nondecreasing along mus
    r2 = r_ball**2
    j = int(np.argmax(f >= r2))
    if f[j] < r2:
        # target above the last breakpoint: saturate everything (caught by
        # the first branch up to rounding)
        t = radius * sgn * support_mask
        return float(radius * a.sum()), t
    # crossing on the segment below breakpoint j: top-j coordinates clipped
    cum2 = np.cumsum(asort**2)
    A2_total = float(asort @ asort)
    k = j
    tail2 = A2_total - (cum2[k - 1] if k else 0.0)
    head = r2 - k * radius**2
    if tail2 > 0 and head >= 0:
        mu = np.sqrt(head / tail2)
    else:
        mu = mus[j]
    lo_mu = mus[j - 1] if j else 0.0
    mu = min(max(mu, lo_mu), mus[j])
    t = sgn * np.minimum(mu * a, radius)
    resid = abs(np.linalg.norm(t) - r_ball)
    if resid > 1e-9 * r_ball:
        lo_m, hi_m = lo_mu, float(mus[j])
        for _ in range(200):
            mid = 0.5 * (lo_m + hi_m)
            t = sgn * np.minimum(mid * a, radius)
            if np.linalg.norm(t) < r_ball:
                lo_m = mid
            else:
                hi_m = mid
        t = sgn * np.minimum(0.5 * (lo_m + hi_m) * a, radius)
    return float(t @ g), t


def support_intersection(body: ConvexBody, r: float, g, method: str = "auto"):
    """sup <g, t> over body ∩ r*B(L2) and an attaining point.

    ``r`` is measured in the body's class L2 metric.  The closed forms are
    exact for l1/l2/linf; ``method="dykstra"`` runs projected gradient
    ascent with Dykstra projections onto the intersection instead (used for
    cross-checks).  For maxnorm_ball the value is the sandwich bound
    min(kG-scaled atom support, ball support), exact at both extremes of r.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    g = body._check_vector(g)
    if r == 0:
        return 0.0, np.zeros_like(g)
    if method == "dykstra":
        return _support_intersection_pga(body, r, g)
    if method not in ("auto", "closed_form"):
        raise ValueError(f"unknown method {method!r}")
    if body.kind == "l1_ball":
        return _support_intersection_l1(body.radius, r, g)
    if body.kind == "l2_ball":
        c = min(body.radius, r)
        n = np.linalg.norm(g)
        if n == 0:
            return 0.0, np.zeros_like(g)
        return float(c * n), c * g / n
    if body.kind == "linf_ball":
        return _support_intersection_linf(body.radius, r, g)
    # maxnorm: min of the two support functions (upper sandwich; the atom
    # side dominates for large r, the Frobenius ball for small r)
    atom_val, t_atom = support(body, g)
    ball_rad = r * body.metric_scale
    n = np.linalg.norm(g)
    ball_val = ball_rad * n
    if ball_val <= atom_val:
        t = ball_rad * g / n if n > 0 else np.zeros_like(g)
        return float(ball_val), t
    return float(atom_val), t_atom


# ---------------------------------------------------------------------------
# iterative cross-check paths


def dykstra_project(x, proj_a, proj_b, tol=DYKSTRA_TOL, max_iter=DYKSTRA_MAX_ITER):
    """Project x onto the intersection of two convex sets by Dykstra's scheme.

    Stops on the increment-change criterion (robust, unlike successive-iterate
    distance which can vanish long before the corrections settle), plus a
    feasibility check of the iterate against the first set.
    """
    y = x.copy()
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    p_prev = p.copy()
    q_prev = q.copy()
    resid = np.inf
    for it in range(max_iter):
        z = proj_a(y + p)
        p = y + p - z
        y = proj_b(z + q)
        q = z + q - y
        incr = np.linalg.norm(p - p_prev) ** 2 + np.linalg.norm(q - q_prev) ** 2
        resid = np.sqrt(incr)
        if resid <= tol and np.linalg.norm(y - proj_a(y)) <= 10.0 * tol:
            return y, it + 1
        p_prev, q_prev = p.copy(), q.copy()
    raise ConvergenceError(
        f"Dykstra did not converge in {max_iter} iterations", residual=float(resid)
    )


def _support_intersection_pga(body, r, g, max_iter=2000, tol=1e-10):
    if body.kind == "maxnorm_ball":
        raise UnsupportedBodyError("no projection oracle for maxnorm_ball")
    ball_rad = r * body.metric_scale

    def proj_ball(v):
        n = np.linalg.norm(v)
        return v if n <= ball_rad else v * (ball_rad / n)

    def proj_body(v):
        return project(body, v)

    def proj_intersection(v):
        y, _ = dykstra_project(v, proj_body, proj_ball)
        return y

    gn = np.linalg.norm(g)
    if gn == 0:
        return 0.0, np.zeros_like(g)
    step = max(body.l2_radius * body.metric_scale, ball_rad) / gn
    t = proj_intersection(step * g)
    val = float(t @ g)
    best_t, best_val = t, val
    for _ in range(max_iter):
        t_new = proj_intersection(t + step * g)
        val_new = float(t_new @ g)
        if val_new > best_val:
            best_t, best_val = t_new, val_new
        if val_new <= val + tol * max(1.0, abs(val)):
            return best_val, best_t
        t, val = t_new, val_new
    return best_val, best_t


def support_via_projected_ascent(body: ConvexBody, g, max_iter=500, tol=1e-12):
    """Support function computed only through the projection oracle."""
    g = body._check_vector(g)
    gn = np.linalg.norm(g)
    if gn == 0:
        return 0.0
    step = 100.0 * body.l2_radius * body.metric_scale / gn
    t = project(body, step * g)
    val = float(t @ g)
    for _ in range(max_iter):
        t_new = project(body, t + step * g)
        val_new = float(t_new @ g)
        if val_new <= val * (1.0 + tol) + tol:
            return max(val, val_new)
        t, val = t_new, val_new
    return val


# ---------------------------------------------------------------------------
# member sampling (for Monte Carlo estimators and search grids)


def sample_points(body: ConvexBody, n: int, rng, boundary_bias: float = 0.0):
    """Draw ``n`` members of the body, rows of the returned array.

    ``boundary_bias`` is the probability of drawing from a boundary-biased
    mixture (sparse faces for l1, sphere for l2, saturated coordinates for
    linf, sign atoms for maxnorm); the remainder is drawn interior-uniform
    (exactly uniform for l2/linf, Dirichlet-based for l1).
    """
    d = body.ambient_dim
    r = body.radius
    out = np.empty((n, d))
    on_boundary = rng.random(n) < boundary_bias
    if body.kind == "l2_ball":
        z = rng.standard_normal((n, d))
        z /= np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-300)
        scale = np.where(on_boundary, 1.0, rng.random(n) ** (1.0 / d))
        out = r * z * scale[:, None]
    elif body.kind == "linf_ball":
        out = r * rng.uniform(-1.0, 1.0, size=(n, d))
        idx = np.nonzero(on_boundary)[0]
        cols = rng.integers(0, d, size=idx.size)
        out[idx, cols] = r * rng.choice([-1.0, 1.0], size=idx.size)
    elif body.kind == "l1_ball":
        for i in range(n):
            if on_boundary[i]:
                k = int(rng.integers(1, min(d, 8) + 1))
                supp = rng.choice(d, size=k, replace=False)
                w = rng.dirichlet(np.ones(k))
                row = np.zeros(d)
                row[supp] = w * rng.choice([-1.0, 1.0], size=k)
                out[i] = r * row
            else:
                w = rng.dirichlet(np.ones(d)) * rng.choice([-1.0, 1.0], size=d)
                out[i] = r * w * rng.random() ** (1.0 / d)
    else:
        p, q = body.matrix_shape
        for i in range(n):
            m = int(rng.integers(1, 4))
            w = rng.dirichlet(np.ones(m))
            A = np.zeros((p, q))
            for j in range(m):
                u = rng.choice([-1.0, 1.0], size=p)
                v = rng.choice([-1.0, 1.0], size=q)
                A += w[j] * np.outer(u, v)
            if not on_boundary[i]:
                A *= rng.random()
            out[i] = r * A.reshape(-1)
    return out
