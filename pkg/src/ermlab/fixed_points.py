"""Complexity fixed points of localized gaussian widths.

For a symmetric convex body the empirical width profile
``H(r) = E||G|| over 2*body ∩ r*B`` has ``H(r)/r`` nonincreasing (star
shape), so each fixed-point equation below has a single sign change and is
solved by bisection:

* ``s_star``:  H(s) = eta * s^2 * sqrt(N)   (noise-sensitive scale)
* ``r_star``:  H(r) = Q * r * sqrt(N)       (noise-free intrinsic scale)
* ``r_k``:     H(r) = Q * r * sqrt(k)       (k-dimensional comparison scale)
* ``q_star``:  C(s) = eta * s^2 * sqrt(N)   with the entropic proxy
  ``C(r) = r * sqrt(log P)`` where ``P`` is a greedy packing count of
  body ∩ 2r*B at separation 2r; this makes q_star a lower-bound flavor of
  the parameter and it is flagged as such in the result metadata.

Because width trials share draws across radii (common random numbers), the
empirical profile is pointwise monotone and bisection can be driven until
the residual at the solution is dominated by estimator noise.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ConvexBody
from .widths import (
    DEFAULT_TRIALS,
    WidthEstimate,
    gaussian_width_mc,
    global_width_mc,
    packing_lower,
)

R_MIN_FRAC = 1e-4
BRACKET_FRAC = 1e-3

_KINDS = ("s_star", "r_star", "r_k", "q_star")


@dataclass(frozen=True)
class FixedPointQuery:
    """Which fixed point to solve and with which parameters.

    Exactly the parameters for the kind must be set: ``eta`` and ``N`` for
    ``s_star``/``q_star``; ``Q`` and ``N`` for ``r_star``; ``Q`` and ``k``
    for ``r_k``.
    """

    kind: str
    N: int = None
    eta: float = None
    Q: float = None
    k: int = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown fixed-point kind {self.kind!r}")
        need_eta = self.kind in ("s_star", "q_star")
        if need_eta:
            if self.eta is None or self.eta <= 0 or self.Q is not None:
                raise ValueError(f"{self.kind} takes eta > 0 (and no Q)")
            if self.N is None or self.N < 1:
                raise ValueError(f"{self.kind} takes N >= 1")
        elif self.kind == "r_star":
            if self.Q is None or self.Q <= 0 or self.eta is not None:
                raise ValueError("r_star takes Q > 0 (and no eta)")
            if self.N is None or self.N < 1:
                raise ValueError("r_star takes N >= 1")
        else:  # r_k
            if self.Q is None or self.Q <= 0 or self.eta is not None:
                raise ValueError("r_k takes Q > 0 (and no eta)")
            if self.k is None or self.k < 1:
                raise ValueError("r_k takes k >= 1")


@dataclass(frozen=True)
class FixedPointResult:
    value: float
    residual: float
    bracket: tuple
    clipped: bool
    stderr: float = 0.0
    evaluations: int = 0
    flavor: str = "width_mc"


_PROFILE_CACHE: dict = {}
_PROFILE_CACHE_CAP = 4096


def _body_key(body: ConvexBody):
    return (body.kind, body.dim if isinstance(body.dim, int) else tuple(body.dim),
            float(body.radius), float(body.kG))


def _cached_width(body, r, trials, seed) -> WidthEstimate:
    key = (_body_key(body), float(r), int(trials), int(seed))
    est = _PROFILE_CACHE.get(key)
    if est is None:
        est = gaussian_width_mc(body, r, trials=trials, seed=seed)
        if len(_PROFILE_CACHE) >= _PROFILE_CACHE_CAP:
            _PROFILE_CACHE.pop(next(iter(_PROFILE_CACHE)))
        _PROFILE_CACHE[key] = est
    return est


def width_profile(body: ConvexBody, grid, trials: int = DEFAULT_TRIALS, seed=0):
    """Width estimates on a radius grid (log-spaced when ``grid`` is an int).

    Estimates are cached; any non-monotonicity in the empirical profile is
    left in place for the caller to inspect, never repaired.
    """
    if isinstance(grid, (int, np.integer)):
        d_f = body.l2_diameter
        grid = np.geomspace(R_MIN_FRAC * d_f, d_f, int(grid))
    return [_cached_width(body, float(r), trials, seed) for r in np.asarray(grid)]


def _entropic_proxy(body, r, trials, seed) -> WidthEstimate:
    budget = max(trials * 4, 800)
    count = packing_lower(body, 2.0 * r, 2.0 * r, budget=budget, seed=seed)
    return WidthEstimate(r=float(r), mean=float(r * math.sqrt(math.log(max(count, 1)))),
                         stderr=0.0, trials=budget)


def solve_fixed_point(body: ConvexBody, query: FixedPointQuery,
                      trials: int = DEFAULT_TRIALS, seed=0,
                      r_min_frac: float = R_MIN_FRAC,
                      bracket_frac: float = BRACKET_FRAC,
                      max_iter: int = 200) -> FixedPointResult:
    """Bisection solve of the fixed-point equation selected by ``query``.

    Returns the crossing radius with the residual |H(value) - target(value)|,
    the final bracket, and ``clipped=True`` when the defining set is empty
    (value pinned at the class L2 diameter, the standard convention).
    """
    d_f = body.l2_diameter
    lo, hi = r_min_frac * d_f, d_f

    if query.kind in ("s_star", "q_star"):
        def target(r):
            return query.eta * r * r * math.sqrt(query.N)
    elif query.kind == "r_star":
        def target(r):
            return query.Q * r * math.sqrt(query.N)
    else:
        def target(r):
            return query.Q * r * math.sqrt(query.k)

    if query.kind == "q_star":
        def estimate(r):
            return _entropic_proxy(body, r, trials, seed)
        flavor = "packing_lower"
    else:
        def estimate(r):
            return _cached_width(body, r, trials, seed)
        flavor = "width_mc"

    evals = 0

    def phi(r):
        nonlocal evals
        evals += 1
        est = estimate(r)
        return est.mean - target(r), est

    f_lo, est_lo = phi(lo)
    if f_lo <= 0:
        # target dominates already at the floor
        return FixedPointResult(value=lo, residual=abs(f_lo), bracket=(lo, lo),
                                clipped=False, stderr=est_lo.stderr,
                                evaluations=evals, flavor=flavor)
    f_hi, est_hi = phi(hi)
    if f_hi > 0:
        # defining set empty: clip to the diameter
        return FixedPointResult(value=hi, residual=abs(f_hi), bracket=(lo, hi),
                                clipped=True, stderr=est_hi.stderr,
                                evaluations=evals, flavor=flavor)

    value, residual, stderr = hi, abs(f_hi), est_hi.stderr
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid, est_mid = phi(mid)
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
            value, residual, stderr = mid, abs(f_mid), est_mid.stderr
        # drive the residual well below the 2*stderr noise level (common
        # random numbers make the empirical profile continuous, so the
        # crossing can be resolved essentially exactly)
        tight_enough = residual <= max(1.2 * stderr, 1e-9 * max(1.0, target(value)))
        if tight_enough and (hi - lo) <= bracket_frac * d_f:
            break
    return FixedPointResult(value=value, residual=residual, bracket=(lo, hi),
                            clipped=False, stderr=stderr, evaluations=evals,
                            flavor=flavor)


def k_star(body: ConvexBody, Q: float, trials: int = DEFAULT_TRIALS, seed=0) -> int:
    """First integer larger than (E||G||_body / (Q * diam))^2."""
    if Q <= 0:
        raise ValueError("Q must be positive")
    w = global_width_mc(body, trials=trials, seed=seed).mean
    ratio_sq = (w / (Q * body.l2_diameter)) ** 2
    return int(math.floor(ratio_sq)) + 1


@dataclass(frozen=True)
class PredictedRate:
    rate: float
    regime: str           # "noisy" or "low_noise"
    s_star: float
    r_star: float

    def __iter__(self):
        return iter((self.rate, self.regime))


DEFAULT_CONSTANTS = {"c1": 1.0, "c3": 1.0, "Q": 1.0}


def predicted_rate(body: ConvexBody, N: int, sigma: float, constants=None,
                   trials: int = DEFAULT_TRIALS, seed=0) -> PredictedRate:
    """Risk-residue prediction max((s*)^2, (r*)^2) with regime selection.

    The noisy regime applies when ``sigma >= c3 * r_star(Q)`` and is rated by
    ``s_star(c1/sigma)^2``; otherwise (including the forced ``sigma == 0``
    case) the intrinsic ``r_star(Q)^2`` applies.
    """
    cfg = dict(DEFAULT_CONSTANTS)
    if constants:
        cfg.update(constants)
    r_res = solve_fixed_point(
        body, FixedPointQuery("r_star", N=N, Q=cfg["Q"]), trials=trials, seed=seed
    )
    r_sq = r_res.value**2
    if sigma == 0:
        return PredictedRate(rate=r_sq, regime="low_noise",
                             s_star=float("nan"), r_star=r_res.value)
    s_res = solve_fixed_point(
        body, FixedPointQuery("s_star", N=N, eta=cfg["c1"] / sigma),
        trials=trials, seed=seed,
    )
    s_sq = s_res.value**2
    if sigma >= cfg["c3"] * r_res.value:
        return PredictedRate(rate=max(s_sq, r_sq), regime="noisy",
                             s_star=s_res.value, r_star=r_res.value)
    return PredictedRate(rate=r_sq, regime="low_noise",
                         s_star=s_res.value, r_star=r_res.value)
