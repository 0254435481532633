"""Monte Carlo localized gaussian mean widths, packing/covering estimators,
sparse separated-set constructions, and kernel-section diameters.

Width trials use common random numbers: trial ``i`` always sees the gaussian
derived from ``(seed, "width-trial", i)`` regardless of the localization
radius, so width profiles are pointwise monotone in ``r`` and fixed-point
solvers can do exact sign tests on the empirical profile.
"""

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.optimize import linprog

from .geometry import ConvexBody, ConvergenceError, UnsupportedBodyError, sample_points, support, support_intersection
from .rng import derive_rng

DEFAULT_TRIALS = 400


@dataclass(frozen=True)
class WidthEstimate:
    """One localized-width estimate E||G|| over (2*body) ∩ r*B(L2)."""

    r: float
    mean: float
    stderr: float
    trials: int


@dataclass(frozen=True)
class SeparatedSet:
    points: np.ndarray  # rows are members of B1 ∩ scale*B2
    separation: float   # guaranteed pairwise l2 distance
    scale: float        # l2 norm of every point

    @property
    def log_count(self) -> float:
        return float(np.log(len(self.points)))


# cached gaussian draws, keyed by (seed, trials, ambient_dim, metric_scale);
# this is what makes repeated width evaluations at different r share draws
_DRAW_CACHE: dict = {}
_DRAW_CACHE_CAP = 32


def _width_draws(body: ConvexBody, trials: int, seed) -> np.ndarray:
    key = (int(seed), int(trials), body.ambient_dim, body.metric_scale)
    hit = _DRAW_CACHE.get(key)
    if hit is not None:
        return hit
    d = body.ambient_dim
    G = np.empty((trials, d))
    for i in range(trials):
        G[i] = derive_rng(seed, "width-trial", i).standard_normal(d)
    G /= body.metric_scale
    if len(_DRAW_CACHE) >= _DRAW_CACHE_CAP:
        _DRAW_CACHE.pop(next(iter(_DRAW_CACHE)))
    _DRAW_CACHE[key] = G
    return G


def gaussian_width_mc(body: ConvexBody, r: float, trials: int = DEFAULT_TRIALS,
                      seed=0) -> WidthEstimate:
    """Monte Carlo estimate of the localized width E||G|| over 2*body ∩ r*B.

    The difference class of a symmetric body is twice the body, so the
    supremum is taken over the doubled body intersected with the L2 ball of
    radius ``r``.  Gaussians follow the class covariance (for maxnorm bodies
    the entries have variance 1/(pq)).
    """
    if trials < 2:
        raise ValueError("trials must be at least 2")
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0:
        return WidthEstimate(r=0.0, mean=0.0, stderr=0.0, trials=trials)
    doubled = body.scaled(2.0)
    draws = _width_draws(body, trials, seed)
    vals = np.empty(trials)
    for i in range(trials):
        try:
            vals[i], _ = support_intersection(doubled, r, draws[i])
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"width trial {i} failed: {exc}", residual=exc.residual
            ) from exc
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(trials))
    return WidthEstimate(r=float(r), mean=mean, stderr=stderr, trials=trials)


def global_width_mc(body: ConvexBody, trials: int = DEFAULT_TRIALS, seed=0) -> WidthEstimate:
    """E||G|| over the body itself (no localization)."""
    draws = _width_draws(body, trials, seed)
    vals = np.array([support(body, draws[i])[0] for i in range(trials)])
    return WidthEstimate(
        r=float(body.l2_radius),
        mean=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / np.sqrt(trials)),
        trials=trials,
    )


def atom_width_mc(p: int, q: int, trials: int = DEFAULT_TRIALS, seed=0) -> WidthEstimate:
    """E max_{u,v} <G, u v^T> for G with iid N(0, 1/(pq)) entries (brute force)."""
    body = ConvexBody("maxnorm_ball", (p, q))
    oracle = body.atom_oracle()
    draws = _width_draws(body, trials, seed)
    vals = np.array(
        [oracle.max_atom(draws[i].reshape(p, q))[0] for i in range(trials)]
    )
    return WidthEstimate(
        r=1.0,
        mean=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / np.sqrt(trials)),
        trials=trials,
    )


# ---------------------------------------------------------------------------
# packing / covering


def _sparse_sep_cached(d: int, k: int) -> "SeparatedSet":
    key = ("gv", d, k)
    hit = _DRAW_CACHE.get(key)
    if hit is None:
        hit = build_sparse_separated_set(d, k)
        _DRAW_CACHE[key] = hit
    return hit


def _localized_samples(body: ConvexBody, r: float, budget: int, rng) -> np.ndarray:
    """Candidate members of body ∩ r*B: boundary-biased samples, and for l1
    bodies the sparse separated-set construction (uniform sampling misses
    the sparse faces that carry the entropy of the localized l1 ball)."""
    blocks = []
    if body.kind == "l1_ball" and r < body.radius:
        k = int(np.ceil((body.radius / r) ** 2))
        if 1 <= k <= body.dim / 4:
            sep = _sparse_sep_cached(body.dim, k)
            pts = body.radius * sep.points
            if len(pts) > budget // 2:
                idx = rng.choice(len(pts), size=budget // 2, replace=False)
                pts = pts[np.sort(idx)]
            signs = rng.choice([-1.0, 1.0], size=(len(pts), 1))
            blocks.append(pts * signs)
    n_rand = budget - sum(len(b) for b in blocks)
    if n_rand > 0:
        blocks.append(sample_points(body, n_rand, rng, boundary_bias=0.5))
    pts = np.vstack(blocks)
    norms = np.linalg.norm(pts, axis=1) / body.metric_scale
    shrink = np.minimum(1.0, r / np.maximum(norms, 1e-300))
    return pts * shrink[:, None]


def packing_lower(body: ConvexBody, r: float, eps: float, budget: int = 2000,
                  seed=0) -> int:
    """Greedy eps-separated subset of body ∩ r*B; lower-bounds the covering
    number of that set at radius eps/2."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = derive_rng(seed, "packing")
    cand = _localized_samples(body, r, budget, rng)
    ms = body.metric_scale
    chosen = [cand[0]]
    for x in cand[1:]:
        dists = np.linalg.norm(np.asarray(chosen) - x, axis=1) / ms
        if dists.min() >= eps:
            chosen.append(x)
    return len(chosen)


def covering_upper(body: ConvexBody, r: float, eps: float, budget: int = 2000,
                   seed=0) -> int:
    """Greedy cover of a sampled cloud of body ∩ r*B by eps-balls centered at
    cloud points; an upper bound up to the sampling failure probability."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = derive_rng(seed, "covering")
    cloud = _localized_samples(body, r, budget, rng)
    ms = body.metric_scale
    covered = np.zeros(len(cloud), dtype=bool)
    centers = 0
    while not covered.all():
        i = int(np.nonzero(~covered)[0][0])
        center = cloud[i]
        dists = np.linalg.norm(cloud - center, axis=1) / ms
        covered |= dists <= eps
        centers += 1
    return centers


def build_sparse_separated_set(d: int, k: int) -> SeparatedSet:
    """Greedy Gilbert–Varshamov family of k-subsets of {1..d} with pairwise
    symmetric difference >= k/2, emitted as the vectors (1/k) * sum_{i in I} e_i.

    Those vectors lie on the boundary of B1^d, on the sphere of radius
    1/sqrt(k), and are pairwise separated by at least sqrt(k/2)/k in l2.
    Deterministic: exhaustive lexicographic scan when C(d, k) is small, a
    fixed-seed random scan otherwise.
    """
    if not (1 <= k <= d / 4):
        raise ValueError(f"need 1 <= k <= d/4, got k={k}, d={d}")
    max_overlap = int(np.floor(k - k / 4.0 + 1e-9))
    if k == 1:
        max_overlap = 0
    if comb(d, k) <= 100_000:
        candidates = itertools.combinations(range(d), k)
        budget = comb(d, k)
    else:
        budget = 4000
        rng = derive_rng(0, "gv-scan", d, k)
        candidates = (
            tuple(sorted(rng.choice(d, size=k, replace=False)))
            for _ in range(budget)
        )
    seen = set()
    chosen = np.zeros((budget, d))
    count = 0
    for subset in candidates:
        if subset in seen:
            continue
        seen.add(subset)
        mask = np.zeros(d)
        mask[list(subset)] = 1.0
        if count and (chosen[:count] @ mask).max() > max_overlap:
            continue
        chosen[count] = mask
        count += 1
    points = chosen[:count] / k
    # overlap <= max_overlap makes |I ^ J| >= 2(k - max_overlap), hence
    # l2 distance >= sqrt(2(k - max_overlap))/k (>= sqrt(k/2)/k)
    return SeparatedSet(
        points=points,
        separation=float(np.sqrt(2.0 * (k - max_overlap)) / k),
        scale=float(1.0 / np.sqrt(k)),
    )


# ---------------------------------------------------------------------------
# kernel-section diameters


def _row_and_kernel_basis(X: np.ndarray, d: int):
    """Orthonormal row-space basis B (rank x d) and kernel basis K (d x nullity)."""
    if X.size == 0:
        return np.zeros((0, d)), np.eye(d)
    U, s, Vt = np.linalg.svd(X, full_matrices=True)
    tol = max(X.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int((s > tol).sum())
    return Vt[:rank], Vt[rank:].T


def _section_support_lp(body: ConvexBody, B: np.ndarray, g: np.ndarray):
    """argmax <g, t> over {B t = 0} ∩ body for l1/linf bodies, via an LP."""
    d = body.ambient_dim
    R = body.radius
    if body.kind == "l1_ball":
        # t = u - v, u, v >= 0, sum(u + v) <= R
        c = np.concatenate([-g, g])
        A_eq = np.hstack([B, -B]) if B.shape[0] else None
        b_eq = np.zeros(B.shape[0]) if B.shape[0] else None
        A_ub = np.ones((1, 2 * d))
        res = linprog(c, A_ub=A_ub, b_ub=[R], A_eq=A_eq, b_eq=b_eq,
                      bounds=(0, None), method="highs")
        if not res.success:
            raise ConvergenceError(f"section LP failed: {res.message}")
        t = res.x[:d] - res.x[d:]
        return t
    if body.kind == "linf_ball":
        res = linprog(-g, A_eq=B if B.shape[0] else None,
                      b_eq=np.zeros(B.shape[0]) if B.shape[0] else None,
                      bounds=(-R, R), method="highs")
        if not res.success:
            raise ConvergenceError(f"section LP failed: {res.message}")
        return res.x
    raise UnsupportedBodyError(f"no section LP for {body.kind}")


def kernel_section_witness(body: ConvexBody, X, method: str = "random_directions",
                           directions: int = 1000, seed=0):
    """Lower bound on the L2 diameter of ker(X) ∩ body plus a witness point.

    Returns ``(diam, h)`` with ``h`` and ``-h`` both in the section and
    ``diam = 2 * ||h||``.  ``method="vertex_enum"`` (l1 only, d <= 12)
    enumerates the section's vertices exactly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = body.ambient_dim
    if X.size and X.shape[1] != d:
        raise ValueError(f"design has {X.shape[1]} columns, body has dim {d}")
    if body.kind == "maxnorm_ball":
        raise UnsupportedBodyError("kernel sections are not supported for maxnorm")
    B, K = _row_and_kernel_basis(X, d)
    nullity = K.shape[1]
    if nullity == 0:
        return 0.0, np.zeros(d)

    if body.kind == "l2_ball":
        h = body.radius * K[:, 0]
        return 2.0 * body.radius, h

    if method == "vertex_enum":
        if body.kind != "l1_ball":
            raise UnsupportedBodyError("vertex_enum is l1-only")
        if d > 12:
            raise ValueError("vertex_enum capped at d <= 12")
        return _l1_vertex_enum(body, B)
    if method != "random_directions":
        raise ValueError(f"unknown method {method!r}")

    rng = derive_rng(seed, "kernel-directions")
    best_norm, best_h = 0.0, np.zeros(d)
    for _ in range(directions):
        w = rng.standard_normal(nullity)
        w /= max(np.linalg.norm(w), 1e-300)
        g = K @ w
        t = _section_support_lp(body, B, g)
        n = np.linalg.norm(t)
        if n > best_norm:
            best_norm, best_h = n, t
    return 2.0 * best_norm, best_h


def _l1_vertex_enum(body: ConvexBody, B: np.ndarray):
    """Exact diameter of {B t = 0} ∩ B1(radius): scan supports of size rank+1."""
    d = body.ambient_dim
    R = body.radius
    rank = B.shape[0]
    if rank == 0:
        h = np.zeros(d)
        h[0] = R
        return 2.0 * R, h
    best_norm, best_h = 0.0, np.zeros(d)
    for S in itertools.combinations(range(d), rank + 1):
        sub = B[:, S]                       # rank x (rank+1): nullity >= 1
        _, s, Vt = np.linalg.svd(sub)
        if s.size and s[-1] <= 1e-10 * max(s[0], 1.0) * max(sub.shape):
            continue  # degenerate support: nullspace dimension above 1
        c = Vt[-1]
        n1 = np.abs(c).sum()
        if n1 < 1e-12:
            continue
        t = np.zeros(d)
        t[list(S)] = R * c / n1
        n = np.linalg.norm(t)
        if n > best_norm:
            best_norm, best_h = n, t
    return 2.0 * best_norm, best_h


def kernel_section_diameter(body: ConvexBody, X, method: str = "random_directions",
                            directions: int = 1000, seed=0) -> float:
    diam, _ = kernel_section_witness(body, X, method=method,
                                     directions=directions, seed=seed)
    return diam
