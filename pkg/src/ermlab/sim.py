"""Synthetic data generation and distributional diagnostics.

Designs are isotropic in their class L2 metric: plain Euclidean for the
vector designs, normalized trace inner product (Frobenius / sqrt(pq)) for
the matrix design, whose entries therefore carry variance 1/(pq).  Targets
are either a linear signal plus independent gaussian noise, or a standard
gaussian response independent of the design (so the class minimizer of the
squared risk is 0 and the excess loss of f has mean ||f||^2).
"""

from dataclasses import dataclass

import numpy as np

from .geometry import ConvexBody, membership, project, sample_points
from .rng import derive_rng

DESIGN_KINDS = (
    "gaussian",
    "rademacher",
    "uniform_cube",
    "unconditional_bounded",
    "matrix_iid",
)
NOISE_KINDS = ("gaussian_noise", "orthogonal_target")

_DEFAULT_L = {
    "gaussian": 1.0,
    "rademacher": 1.0,
    "uniform_cube": 1.0,
    "unconditional_bounded": 2.0,
    "matrix_iid": 1.0,
}


class ModelError(ValueError):
    """Unknown or misspecified synthetic model."""


@dataclass(frozen=True)
class DesignSpec:
    """Distribution of the inputs X.

    ``claimed_L`` is a metadata bound on the subgaussian constant of the
    design, checked against the moment-based psi2 proxy in tests.
    """

    kind: str
    d: int = None
    p: int = None
    q: int = None
    claimed_L: float = None

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ModelError(f"unknown design kind {self.kind!r}")
        if self.kind == "matrix_iid":
            if not (self.p and self.q and self.p >= 1 and self.q >= 1):
                raise ValueError("matrix_iid needs p and q")
        elif not (self.d and self.d >= 1):
            raise ValueError(f"{self.kind} needs a positive d")
        if self.claimed_L is None:
            object.__setattr__(self, "claimed_L", _DEFAULT_L[self.kind])

    @property
    def ambient_dim(self) -> int:
        return self.p * self.q if self.kind == "matrix_iid" else self.d

    @property
    def metric_scale(self) -> float:
        if self.kind == "matrix_iid":
            return float(np.sqrt(self.p * self.q))
        return 1.0

    def class_l2_norm(self, v) -> float:
        """L2(mu) norm of the linear functional <v, .> under this design."""
        return float(np.linalg.norm(np.asarray(v, dtype=float))) / self.metric_scale

    def sample(self, N: int, rng) -> np.ndarray:
        d = self.ambient_dim
        if self.kind == "gaussian":
            return rng.standard_normal((N, d))
        if self.kind == "rademacher":
            return rng.choice([-1.0, 1.0], size=(N, d))
        if self.kind == "uniform_cube":
            s = np.sqrt(3.0)
            return rng.uniform(-s, s, size=(N, d))
        if self.kind == "unconditional_bounded":
            # eps * (1 + u) normalized to unit variance; bounded, unconditional,
            # coordinates bounded away from zero in L2
            u = rng.uniform(0.0, 1.0, size=(N, d))
            eps = rng.choice([-1.0, 1.0], size=(N, d))
            return eps * (1.0 + u) / np.sqrt(7.0 / 3.0)
        # matrix_iid: isotropic for the normalized trace inner product
        return rng.standard_normal((N, d)) / self.metric_scale


@dataclass(frozen=True)
class NoiseSpec:
    """Target model; ``sigma`` is the psi2 scale of Y - f*(X).

    For ``orthogonal_target`` the response is standard gaussian independent
    of X (variance 1, density bounded near 0) and ``sigma`` is metadata.
    """

    kind: str
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ModelError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    meta: dict

    def __post_init__(self):
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y row counts differ")
        if not (np.isfinite(self.X).all() and np.isfinite(self.Y).all()):
            raise ValueError("non-finite entries in dataset")

    @property
    def N(self) -> int:
        return self.X.shape[0]


def sample_dataset(design: DesignSpec, noise: NoiseSpec, t_star, N: int,
                   seed=0) -> Dataset:
    """N i.i.d. rows of the model; deterministic per seed.

    ``Y = X t* + sigma * g`` for gaussian_noise (t_star required, expected to
    be a member of the index body), or an independent standard gaussian for
    orthogonal_target.
    """
    rng_x = derive_rng(seed, "design")
    rng_y = derive_rng(seed, "noise")
    X = design.sample(N, rng_x)
    if noise.kind == "gaussian_noise":
        if t_star is None:
            raise ModelError("gaussian_noise requires t_star")
        t_star = np.asarray(t_star, dtype=float).reshape(-1)
        Y = X @ t_star + noise.sigma * rng_y.standard_normal(N)
    else:
        t_star = None if t_star is None else np.asarray(t_star, dtype=float)
        Y = rng_y.standard_normal(N)
    meta = {"design": design, "noise": noise, "t_star": t_star, "seed": seed}
    return Dataset(X=X, Y=Y, meta=meta)


def psi2_estimate(samples, p_max: int = 10) -> float:
    """Moment proxy for the psi2 norm: max_{2<=p<=p_max} ||x||_{L_p}/sqrt(p).

    Higher moments than the default p_max = 10 are too noisy at desk scale.
    """
    a = np.abs(np.asarray(samples, dtype=float).reshape(-1))
    if a.size == 0:
        raise ValueError("empty sample")
    best = 0.0
    for p in range(2, p_max + 1):
        lp = float(np.mean(a**p)) ** (1.0 / p)
        best = max(best, lp / np.sqrt(p))
    return best


def _population_minimizer(cls, design, noise, t0):
    d = None
    if isinstance(cls, ConvexBody):
        d = cls.ambient_dim
        if noise.kind == "orthogonal_target":
            return np.zeros(d)
        if membership(cls, t0, tol=1e-12):
            return np.asarray(t0, dtype=float)
        return project(cls, t0)
    cls = np.asarray(cls, dtype=float)
    if noise.kind == "orthogonal_target":
        norms = np.array([design.class_l2_norm(row) for row in cls])
    else:
        norms = np.array([design.class_l2_norm(row - t0) for row in cls])
    return cls[int(np.argmin(norms))]


def bernstein_estimate(cls, design: DesignSpec, noise: NoiseSpec, t_star_ref,
                       grid_size: int = 200, mc_size: int = 2000, seed=0) -> float:
    """Largest sampled value of ||f - f*||^2 / (mean excess loss of f).

    ``cls`` is a ConvexBody or a finite class given as an array of rows.
    The population minimizer f* and the mean excess loss are closed form for
    isotropic designs: with target <t0, X> + noise the excess-loss mean of
    <t, .> is ||t - t0||^2 - ||f* - t0||^2 (orthogonal target: ||t||^2 -
    ||f*||^2).  The sup is over ``grid_size`` sampled members plus a
    random-perturbation refinement of the best one (mc_size trials).
    """
    if noise.kind == "gaussian_noise" and t_star_ref is None:
        raise ModelError("gaussian_noise requires a target parameter")
    t0 = None if t_star_ref is None else np.asarray(t_star_ref, dtype=float).reshape(-1)
    f_star = _population_minimizer(cls, design, noise, t0)

    def excess_mean(t):
        if noise.kind == "orthogonal_target":
            return design.class_l2_norm(t) ** 2 - design.class_l2_norm(f_star) ** 2
        return (design.class_l2_norm(t - t0) ** 2
                - design.class_l2_norm(f_star - t0) ** 2)

    def ratio(t):
        pl = excess_mean(t)
        if pl < -1e-9:
            raise ModelError(
                "negative mean excess loss on the grid; population minimizer "
                "is misspecified"
            )
        num = design.class_l2_norm(t - f_star) ** 2
        if pl <= 1e-12:
            return None
        return num / pl

    rng = derive_rng(seed, "bernstein")
    if isinstance(cls, ConvexBody):
        grid = sample_points(cls, grid_size, rng, boundary_bias=0.5)
    else:
        grid = np.asarray(cls, dtype=float)
    ratios = [(ratio(t), t) for t in grid]
    ratios = [(v, t) for v, t in ratios if v is not None]
    if not ratios:
        raise ModelError("no grid member with positive mean excess loss")
    best_val, best_t = max(ratios, key=lambda vt: vt[0])

    if isinstance(cls, ConvexBody):
        scale = 0.2 * max(np.linalg.norm(best_t), cls.radius * 0.1)
        for _ in range(mc_size):
            cand = project(cls, best_t + scale * rng.standard_normal(best_t.size)) \
                if cls.kind != "maxnorm_ball" else None
            if cand is None:
                break
            v = ratio(cand)
            if v is not None and v > best_val:
                best_val, best_t = v, cand
            else:
                scale *= 0.999
    return float(best_val)
