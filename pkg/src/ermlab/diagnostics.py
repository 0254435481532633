"""Empirical checks of the isomorphic method and the lower-bound mechanisms.

The ratio-process supremum over a localized class is approximated by
multi-start local search and therefore reported as a *lower bound* on the
true supremum; that is the honest direction for checking that the
norm-equivalence event fails.  The gaussian shift bound and the two-point
indistinguishability demo are exact mechanisms and are checked at machine
accuracy / by construction.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .erm import ErmConfig, erm_linear
from .geometry import ConvexBody, UnsupportedBodyError, membership
from .rng import derive_rng
from .sim import Dataset, DesignSpec, ModelError, NoiseSpec, sample_dataset
from .widths import kernel_section_witness


class EmptyLocalizationError(ValueError):
    """No class member reaches the requested excess-loss level."""


class TrivialKernelError(ValueError):
    """The design determines every class member on the sample."""


@dataclass(frozen=True)
class RatioQuery:
    """Localization level and search effort for the ratio-process estimate."""

    lam: float
    m: int = 64
    ascent_steps: int = 60
    body: ConvexBody = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


def _model_center(data: Dataset):
    noise = data.meta["noise"]
    d = data.X.shape[1]
    if noise.kind == "orthogonal_target":
        return np.zeros(d)
    t_star = data.meta.get("t_star")
    if t_star is None:
        raise ModelError("gaussian_noise model without t_star")
    return np.asarray(t_star, dtype=float)


def _random_extreme_point(body, rng):
    d = body.ambient_dim
    if body.kind == "l1_ball":
        v = np.zeros(d)
        v[int(rng.integers(0, d))] = body.radius * (1.0 if rng.random() < 0.5
                                                    else -1.0)
        return v
    if body.kind == "l2_ball":
        v = rng.standard_normal(d)
        return body.radius * v / np.linalg.norm(v)
    return body.radius * rng.choice([-1.0, 1.0], size=d)


def _max_feasible_step(body, center, u, cap):
    """Largest s <= cap with center + s*u in the body (bisection on the gauge)."""
    if membership(body, center + cap * u, tol=1e-12):
        return cap
    lo, hi = 0.0, cap
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if membership(body, center + mid * u, tol=1e-12):
            lo = mid
        else:
            hi = mid
    return lo


def ratio_sup_estimate(query: RatioQuery, data: Dataset, seed=0) -> float:
    """Search lower bound on sup |P_N L_f / P L_f - 1| over {P L_f >= lambda}.

    Candidates are drawn at excess-loss levels in [lambda, 4*lambda] along a
    sparse/dense direction mixture, then hill-climbed by projected
    coordinate ascent that keeps both body membership and the localization
    constraint.
    """
    body = query.body
    if body is None:
        raise ValueError("query.body is required")
    if body.kind == "maxnorm_ball":
        raise UnsupportedBodyError("ratio search needs cheap membership; "
                                   "maxnorm_ball is not supported")
    X, Y = data.X, data.Y
    N, d = X.shape
    center = _model_center(data)
    design = data.meta["design"]
    Yc = Y - X @ center
    base = float(Yc @ Yc) / N

    def stat(t):
        h = X @ (t - center)
        pl = design.class_l2_norm(t - center) ** 2
        emp = float(h @ h - 2.0 * Yc @ h) / N        # P_N of the excess loss
        return abs(emp / pl - 1.0), pl

    rng = derive_rng(seed, "ratio-search")
    s_lo = np.sqrt(query.lam)
    best = None
    found = 0
    for j in range(query.m):
        t = None
        for _ in range(12):
            mode = rng.random()
            if mode < 0.4:
                # toward a random extreme point: reaches the far side of the
                # body from any center (the segment stays inside)
                v = _random_extreme_point(body, rng)
                u = v - center
                n = np.linalg.norm(u)
                if n < 1e-12:
                    continue
                u /= n
            elif mode < 0.7:
                k = int(rng.integers(1, min(d, 4) + 1))
                u = np.zeros(d)
                supp = rng.choice(d, size=k, replace=False)
                u[supp] = rng.choice([-1.0, 1.0], size=k) / np.sqrt(k)
            else:
                u = rng.standard_normal(d)
                u /= np.linalg.norm(u)
            u *= design.metric_scale          # unit length in the class metric
            s_max = _max_feasible_step(body, center, u, 2.0 * s_lo)
            if s_max >= s_lo:
                s = s_lo + (s_max - s_lo) * rng.random()
                t = center + s * u
                break
        if t is None:
            continue
        found += 1
        val, _ = stat(t)
        delta = 0.3 * s_lo
        for _ in range(query.ascent_steps):
            i = int(rng.integers(0, d))
            sign = 1.0 if rng.random() < 0.5 else -1.0
            cand = t.copy()
            cand[i] += sign * delta
            if membership(body, cand, tol=1e-12):
                v, pl = stat(cand)
                if pl >= query.lam and v > val:
                    t, val = cand, v
                    continue
            delta *= 0.97
        if best is None or val > best:
            best = val
    if found == 0 or best is None:
        raise EmptyLocalizationError(
            f"no class member with excess-loss level >= {query.lam:.3g}"
        )
    return float(best)


def isomorphic_event_check(data: Dataset, body: ConvexBody, lam: float,
                           m: int = 64, ascent_steps: int = 60, seed=0):
    """(holds, worst_ratio): does the empirical/population excess-loss ratio
    stay within [1/2, 3/2] above the level lam, as far as the search can see?"""
    worst = ratio_sup_estimate(
        RatioQuery(lam=lam, m=m, ascent_steps=ascent_steps, body=body), data,
        seed=seed,
    )
    return worst <= 0.5, worst


def gaussian_shift_bound(alpha: float, shift: float) -> float:
    """1 - Phi(Phi^{-1}(1 - alpha) + shift).

    The guaranteed measure of a set under a gaussian shifted by ``shift``
    standard deviations, given that the unshifted measure is ``alpha``;
    attained with equality by halfspaces orthogonal to the shift.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    if shift < 0:
        raise ValueError("shift must be nonnegative")
    return float(ndtr(-(ndtri(1.0 - alpha) + shift)))


def accuracy_confidence_lower(sigma: float, N: int, delta: float,
                              d_f: float = np.inf, c1: float = 1.0) -> float:
    """min(c1 * sigma^2 * log(1/delta) / N, d_f^2 / 4)."""
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must be in (0, 1]")
    if N < 1:
        raise ValueError("N must be >= 1")
    return float(min(c1 * sigma**2 * np.log(1.0 / delta) / N, 0.25 * d_f**2))


def two_point_minimax_demo(estimator, body: ConvexBody, X, noise_seed,
                           sigma: float = 1.0, directions: int = 500,
                           witness_seed=0):
    """Feed an estimator two indistinguishable targets and report its error.

    ``h`` and ``-h`` are near-diametric in the set of members vanishing on
    the sample, so both targets produce the same data; whatever single
    answer the estimator returns is at least the half-distance away from
    one of them.  Returns ``(reported_error, lower_bound)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    diam, h = kernel_section_witness(body, X, directions=directions,
                                     seed=witness_seed)
    if diam <= 1e-12:
        raise TrivialKernelError("kernel section of the body is trivial")
    rng = derive_rng(noise_seed, "two-point-noise")
    V = sigma * rng.standard_normal(X.shape[0])
    Y1 = X @ h + V
    Y2 = X @ (-h) + V
    if not np.allclose(Y1, Y2, atol=1e-9):
        raise AssertionError("witness is not in the kernel; datasets differ")
    f0 = np.asarray(estimator(X, Y1), dtype=float)
    reported = max(float(np.linalg.norm(f0 - h)), float(np.linalg.norm(f0 + h)))
    bound = float(np.linalg.norm(h))
    if reported < bound - 1e-9:
        raise AssertionError("triangle inequality violated; estimator output "
                             "is not a single point")
    return reported, bound


def erm_estimator(body: ConvexBody, cfg: ErmConfig = None):
    """Estimator callable (X, Y) -> t_hat backed by the projected-gradient solver."""

    def fit(X, Y):
        meta = {"design": None, "noise": None, "t_star": None}
        data = Dataset(X=np.asarray(X, dtype=float),
                       Y=np.asarray(Y, dtype=float), meta=meta)
        return erm_linear(body, data, cfg).t_hat

    return fit


def confidence_accuracy_curve(estimator, body: ConvexBody, design: DesignSpec,
                              sigma: float, N: int, trials: int, deltas,
                              seed=0):
    """Empirical (1 - delta)-quantiles of the excess risk next to the
    accuracy/confidence lower bound, one row per delta."""
    t_star = np.zeros(body.ambient_dim)
    noise = NoiseSpec("gaussian_noise", sigma=sigma)
    excesses = np.empty(trials)
    for i in range(trials):
        trial_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        data = sample_dataset(design, noise, t_star, N, seed=trial_seed)
        t_hat = np.asarray(estimator(data.X, data.Y), dtype=float)
        excesses[i] = design.class_l2_norm(t_hat) ** 2
    rows = []
    for delta in deltas:
        rows.append({
            "delta": float(delta),
            "quantile": float(np.quantile(excesses, 1.0 - delta)),
            "lower_bound": accuracy_confidence_lower(
                sigma, N, delta, d_f=body.l2_diameter
            ),
        })
    return rows
