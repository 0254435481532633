import numpy as np
import pytest
from scipy.special import gammaln

from ermlab.erm import ErmConfig, erm_linear
from ermlab.geometry import ConvexBody
from ermlab.rng import derive_rng
from ermlab.sim import (
    DesignSpec,
    ModelError,
    NoiseSpec,
    bernstein_estimate,
    psi2_estimate,
    sample_dataset,
)

ALL_VECTOR_DESIGNS = ("gaussian", "rademacher", "uniform_cube",
                      "unconditional_bounded")


def gaussian_psi2_proxy_oracle(p_max=10):
    """Exact max_p ||g||_{L_p}/sqrt(p) from the gaussian moment formula."""
    best = 0.0
    for p in range(2, p_max + 1):
        lp = (2.0 ** (p / 2.0) * np.exp(gammaln((p + 1) / 2.0) - gammaln(0.5)))
        best = max(best, lp ** (1.0 / p) / np.sqrt(p))
    return best


def test_sample_dataset_noiseless_exact():
    design = DesignSpec("gaussian", d=5)
    t = np.array([0.2, 0, 0, -0.1, 0.3])
    data = sample_dataset(design, NoiseSpec("gaussian_noise", 0.0), t, 50, seed=1)
    np.testing.assert_allclose(data.Y, data.X @ t, atol=1e-12)


def test_sample_dataset_reproducible():
    design = DesignSpec("rademacher", d=4)
    a = sample_dataset(design, NoiseSpec("gaussian_noise", 1.0), np.zeros(4), 20, seed=7)
    b = sample_dataset(design, NoiseSpec("gaussian_noise", 1.0), np.zeros(4), 20, seed=7)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.Y, b.Y)


def test_sample_dataset_missing_t_star():
    with pytest.raises(ModelError):
        sample_dataset(DesignSpec("gaussian", d=3),
                       NoiseSpec("gaussian_noise", 1.0), None, 10)


def test_rademacher_column_means():
    N = 4000
    data = sample_dataset(DesignSpec("rademacher", d=6),
                          NoiseSpec("orthogonal_target"), None, N, seed=2)
    assert np.abs(data.X.mean(axis=0)).max() <= 3.0 / np.sqrt(N)


def test_gaussian_gram_identity():
    N, d = 100_000, 4
    data = sample_dataset(DesignSpec("gaussian", d=d),
                          NoiseSpec("orthogonal_target"), None, N, seed=3)
    gram = data.X.T @ data.X / N
    assert np.abs(gram - np.eye(d)).max() <= 0.02


@pytest.mark.parametrize("kind", ALL_VECTOR_DESIGNS)
def test_isotropy_unit_directions(kind):
    N, d = 20_000, 8
    design = DesignSpec(kind, d=d)
    data = sample_dataset(design, NoiseSpec("orthogonal_target"), None, N, seed=4)
    rng = derive_rng(4, "directions", kind)
    for _ in range(10):
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        var = np.mean((data.X @ u) ** 2)
        assert abs(var - 1.0) <= 4.0 / np.sqrt(N)


def test_isotropy_matrix_design_class_metric():
    # unit vectors of the normalized trace inner product have second moment 1
    p = q = 4
    design = DesignSpec("matrix_iid", p=p, q=q)
    data = sample_dataset(design, NoiseSpec("orthogonal_target"), None, 20_000, seed=5)
    rng = derive_rng(5, "matdirs")
    for _ in range(10):
        u = rng.standard_normal(p * q)
        u *= design.metric_scale / np.linalg.norm(u)   # unit class norm
        var = np.mean((data.X @ u) ** 2)
        assert abs(var - 1.0) <= 4.0 / np.sqrt(20_000)


def test_unconditional_bounded_properties():
    design = DesignSpec("unconditional_bounded", d=3)
    data = sample_dataset(design, NoiseSpec("orthogonal_target"), None, 50_000, seed=6)
    bound = 2.0 / np.sqrt(7.0 / 3.0)
    assert np.abs(data.X).max() <= bound + 1e-12
    assert np.abs(data.X).min() >= 1.0 / np.sqrt(7.0 / 3.0) - 1e-12
    assert abs((data.X**2).mean() - 1.0) <= 0.02


# ---------------------------------------------------------------------------
# psi2


def test_psi2_zero_sample():
    assert psi2_estimate(np.zeros(100)) == 0.0


def test_psi2_empty_rejected():
    with pytest.raises(ValueError):
        psi2_estimate([])


def test_psi2_gaussian_matches_moment_oracle():
    rng = derive_rng(7, "psi2g")
    x = rng.standard_normal(100_000)
    val = psi2_estimate(x)
    oracle = gaussian_psi2_proxy_oracle()
    assert 0.6 <= val <= 1.2
    assert val == pytest.approx(oracle, rel=0.05)


def test_psi2_rademacher():
    rng = derive_rng(8, "psi2r")
    x = rng.choice([-1.0, 1.0], size=50_000)
    assert psi2_estimate(x) == pytest.approx(1.0 / np.sqrt(2.0), rel=0.05)


@pytest.mark.parametrize("kind", ALL_VECTOR_DESIGNS + ("matrix_iid",))
def test_psi2_within_claimed_bound(kind):
    if kind == "matrix_iid":
        design = DesignSpec(kind, p=3, q=4)
    else:
        design = DesignSpec(kind, d=8)
    data = sample_dataset(design, NoiseSpec("orthogonal_target"), None,
                          40_000, seed=9)
    rng = derive_rng(9, "psi2dir", kind)
    for _ in range(5):
        u = rng.standard_normal(design.ambient_dim)
        u *= design.metric_scale / np.linalg.norm(u)
        assert psi2_estimate(data.X @ u) <= design.claimed_L * 1.5


# ---------------------------------------------------------------------------
# Bernstein diagnostics


def test_bernstein_convex_body_at_most_one():
    design = DesignSpec("gaussian", d=6)
    noise = NoiseSpec("gaussian_noise", 0.5)
    t0 = np.full(6, 0.4)                     # outside the l1 ball
    body = ConvexBody("l1_ball", 6, 1.0)
    val = bernstein_estimate(body, design, noise, t0, grid_size=300,
                             mc_size=500, seed=10)
    assert val <= 1.0 + 1e-6


def test_bernstein_two_point_class_hand_oracle():
    # class {0, e1}, target 0.45*e1: minimizer is 0, and the ratio at e1 is
    # 1 / (0.55^2 - 0.45^2) = 10 exactly
    design = DesignSpec("gaussian", d=3)
    noise = NoiseSpec("gaussian_noise", 1.0)
    cls = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    t0 = np.array([0.45, 0.0, 0.0])
    val = bernstein_estimate(cls, design, noise, t0)
    assert val == pytest.approx(10.0, abs=1e-9)
    assert val > 1.0


def test_bernstein_realizable_target_ratio_one():
    design = DesignSpec("gaussian", d=5)
    noise = NoiseSpec("gaussian_noise", 0.3)
    body = ConvexBody("l2_ball", 5, 1.0)
    t0 = np.array([0.2, -0.1, 0.0, 0.05, 0.0])   # inside: f* = t0
    val = bernstein_estimate(body, design, noise, t0, grid_size=200,
                             mc_size=200, seed=11)
    assert val == pytest.approx(1.0, abs=1e-9)


def test_bernstein_orthogonal_target_body():
    design = DesignSpec("gaussian", d=4)
    val = bernstein_estimate(ConvexBody("l1_ball", 4, 1.0), design,
                             NoiseSpec("orthogonal_target"), None,
                             grid_size=100, mc_size=100, seed=12)
    assert val == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# orthogonal-target sanity through ERM


def test_orthogonal_target_erm_shrinks():
    design = DesignSpec("gaussian", d=4)
    data = sample_dataset(design, NoiseSpec("orthogonal_target"), None,
                          100_000, seed=13)
    body = ConvexBody("l1_ball", 4, 1.0)
    sol = erm_linear(body, data, ErmConfig())
    assert np.linalg.norm(sol.t_hat) <= 0.05
