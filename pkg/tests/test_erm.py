import itertools

import numpy as np
import pytest

from ermlab.erm import (
    ErmConfig,
    erm_frank_wolfe_atoms,
    erm_linear,
    erm_maxnorm_factorized,
    excess_risk,
    excess_risk_holdout,
)
from ermlab.geometry import AtomOracle, ConvexBody, maxnorm_gauge, membership
from ermlab.rng import derive_rng
from ermlab.sim import DesignSpec, NoiseSpec, sample_dataset


def make_data(d=5, N=200, sigma=0.5, t=None, seed=0, kind="gaussian"):
    design = DesignSpec(kind, d=d)
    if t is None:
        t = np.zeros(d)
        t[0] = 0.5
    return sample_dataset(design, NoiseSpec("gaussian_noise", sigma), t, N, seed=seed)


def all_atoms(p, q):
    out = []
    for u in itertools.product([-1.0, 1.0], repeat=p):
        for v in itertools.product([-1.0, 1.0], repeat=q):
            out.append(np.outer(u, v).reshape(-1))
    return np.array(out)


def hull_risk_oracle(X, Y, p, q):
    """Exact min empirical risk over conv(sign atoms) via a simplex QP."""
    import cvxpy as cp

    A = all_atoms(p, q)
    M = X @ A.T
    w = cp.Variable(A.shape[0], nonneg=True)
    obj = cp.Minimize(cp.sum_squares(Y - M @ w) / X.shape[0])
    prob = cp.Problem(obj, [cp.sum(w) == 1])
    prob.solve()
    assert prob.status == "optimal"
    return float(prob.value)


# ---------------------------------------------------------------------------
# projected gradient solver


def test_interior_optimum_matches_lstsq():
    data = make_data(d=3, N=300, sigma=0.1, t=np.array([0.1, -0.05, 0.02]), seed=1)
    body = ConvexBody("l2_ball", 3, 10.0)     # constraint slack
    sol = erm_linear(body, data)
    ols, *_ = np.linalg.lstsq(data.X, data.Y, rcond=None)
    np.testing.assert_allclose(sol.t_hat, ols, atol=1e-6)


def test_one_dim_clipping():
    rng = derive_rng(2, "clip")
    X = rng.standard_normal((200, 1))
    Y = 3.0 * X[:, 0]
    data = make_data(d=1, N=1, sigma=0.0, t=np.zeros(1))
    data = type(data)(X=X, Y=Y, meta=data.meta)
    sol = erm_linear(ConvexBody("l2_ball", 1, 1.0), data)
    assert sol.t_hat[0] == pytest.approx(1.0, abs=1e-8)


def test_d2_l1_matches_grid_oracle():
    data = make_data(d=2, N=60, sigma=0.8, t=np.array([0.9, -0.4]), seed=3)
    body = ConvexBody("l1_ball", 2, 1.0)
    sol = erm_linear(body, data)
    # exhaustive grid over the ball, step 1e-3
    g = np.arange(-1.0, 1.0 + 1e-12, 1e-3)
    T1, T2 = np.meshgrid(g, g, indexing="ij")
    mask = np.abs(T1) + np.abs(T2) <= 1.0
    T = np.stack([T1[mask], T2[mask]], axis=1)
    risks = ((data.Y[None, :] - T @ data.X.T) ** 2).mean(axis=1)
    assert sol.empirical_risk <= risks.min() + 1e-3
    assert membership(body, sol.t_hat, tol=1e-6)


def test_risk_recomputation_invariant():
    data = make_data(seed=4)
    sol = erm_linear(ConvexBody("l1_ball", 5, 1.0), data)
    recomputed = float(np.mean((data.Y - data.X @ sol.t_hat) ** 2))
    assert sol.empirical_risk == pytest.approx(recomputed, abs=1e-10)


def test_monotone_descent_from_any_start():
    # backtracking accepts only sufficient-decrease steps
    rng = derive_rng(20, "descent")
    body = ConvexBody("l1_ball", 6, 1.0)
    data = make_data(d=6, N=30, sigma=1.0, t=np.zeros(6), seed=20)
    for _ in range(5):
        x0 = rng.standard_normal(6)
        start = np.maximum(np.abs(x0) / np.abs(x0).sum(), 0) * np.sign(x0)
        risk0 = float(np.mean((data.Y - data.X @ start) ** 2))
        sol = erm_linear(body, data, ErmConfig(x0=start))
        assert sol.empirical_risk <= risk0 + 1e-12


def test_realizable_noiseless_consistency():
    d = 16
    t = np.zeros(d)
    t[:4] = 0.25
    data = make_data(d=d, N=4 * d, sigma=0.0, t=t, seed=5)
    body = ConvexBody("l1_ball", d, 1.0)
    sol = erm_linear(body, data, ErmConfig(tol=1e-10))
    assert excess_risk(sol, data) <= 1e-8


def test_feasibility_always():
    rng = derive_rng(6, "feas")
    for kind in ("l1_ball", "l2_ball", "linf_ball"):
        body = ConvexBody(kind, 6, 0.7)
        for seed in range(3):
            t = np.zeros(6)
            t[0] = 2.0            # target far outside: constraint active
            data = make_data(d=6, N=40, sigma=1.0, t=t, seed=seed)
            sol = erm_linear(body, data)
            assert membership(body, sol.t_hat, tol=1e-6)


# ---------------------------------------------------------------------------
# Frank-Wolfe over the atom hull


def test_fw_zero_response():
    p = q = 3
    design = DesignSpec("matrix_iid", p=p, q=q)
    data = sample_dataset(design, NoiseSpec("gaussian_noise", 0.0),
                          np.zeros(p * q), 50, seed=7)
    sol = erm_frank_wolfe_atoms(AtomOracle(p, q), data)
    np.testing.assert_allclose(sol.t_hat, 0.0)
    assert sol.certificate == 0.0


def test_fw_realizable_rank_one():
    p = q = 3
    design = DesignSpec("matrix_iid", p=p, q=q)
    A_star = np.outer([1, -1, 1], [1, 1, -1]).astype(float).reshape(-1)
    data = sample_dataset(design, NoiseSpec("gaussian_noise", 0.0), A_star,
                          4 * p * q, seed=8)
    sol = erm_frank_wolfe_atoms(AtomOracle(p, q), data, iters=6000,
                                gap_tol=1e-8)
    assert sol.empirical_risk <= 1e-6


def test_fw_matches_simplex_qp_oracle():
    p = q = 3
    design = DesignSpec("matrix_iid", p=p, q=q)
    A_star = 0.6 * np.outer([1, 1, -1], [1, -1, 1]).astype(float).reshape(-1)
    data = sample_dataset(design, NoiseSpec("gaussian_noise", 0.3), A_star,
                          80, seed=9)
    sol = erm_frank_wolfe_atoms(AtomOracle(p, q), data, iters=8000,
                                gap_tol=1e-7)
    oracle = hull_risk_oracle(data.X, data.Y, p, q)
    assert sol.empirical_risk == pytest.approx(oracle, abs=1e-4)


# ---------------------------------------------------------------------------
# factorized max-norm solver


def test_factorized_realizable_rank_one():
    p = q = 4
    design = DesignSpec("matrix_iid", p=p, q=q)
    A_star = np.outer([1, -1, 1, -1], [1, 1, -1, -1]).astype(float).reshape(-1)
    data = sample_dataset(design, NoiseSpec("gaussian_noise", 0.0), A_star,
                          3 * p * q, seed=10)
    sol = erm_maxnorm_factorized(p, q, data, seed=10)
    assert sol.empirical_risk <= 1e-6


def test_factorized_feasible_and_beats_fw():
    p = q = 4
    design = DesignSpec("matrix_iid", p=p, q=q)
    rng = derive_rng(11, "fwcmp")
    for seed in range(3):
        A_star = np.outer(rng.choice([-1.0, 1.0], p),
                          rng.choice([-1.0, 1.0], q)).reshape(-1)
        data = sample_dataset(design, NoiseSpec("gaussian_noise", 0.4),
                              A_star, 60, seed=seed)
        fw = erm_frank_wolfe_atoms(AtomOracle(p, q), data, iters=8000,
                                   gap_tol=1e-7)
        fac = erm_maxnorm_factorized(p, q, data, seed=seed)
        # conv(atoms) is inside the max-norm ball: factorized can't lose
        assert fac.empirical_risk <= fw.empirical_risk + 1e-3


def test_factorized_rank_nesting():
    p = q = 4
    design = DesignSpec("matrix_iid", p=p, q=q)
    A_star = np.outer([1, -1, 1, -1], [1, 1, -1, -1]).astype(float).reshape(-1)
    data = sample_dataset(design, NoiseSpec("gaussian_noise", 0.5), A_star,
                          50, seed=12)
    full = erm_maxnorm_factorized(p, q, data, rank_k=4, seed=12)
    one = erm_maxnorm_factorized(p, q, data, rank_k=1, seed=12)
    assert full.empirical_risk <= one.empirical_risk + 1e-9


def test_factorized_membership_certificate():
    p = q = 3
    design = DesignSpec("matrix_iid", p=p, q=q)
    A_star = np.outer([1, -1, 1], [1, 1, -1]).astype(float).reshape(-1)
    data = sample_dataset(design, NoiseSpec("gaussian_noise", 0.3), A_star,
                          40, seed=13)
    sol = erm_maxnorm_factorized(p, q, data, seed=13)
    assert maxnorm_gauge(sol.t_hat.reshape(p, q)) <= 1.0 + 1e-6


# ---------------------------------------------------------------------------
# excess risk


def test_excess_risk_exact_cases():
    data = make_data(d=4, N=30, sigma=0.5, t=np.array([0.3, 0, 0, 0]), seed=14)
    sol_exact = type("S", (), {"t_hat": data.meta["t_star"]})
    assert excess_risk(sol_exact, data) == 0.0
    shifted = data.meta["t_star"] + np.array([0.2, 0, 0, 0])
    sol_shift = type("S", (), {"t_hat": shifted})
    assert excess_risk(sol_shift, data) == pytest.approx(0.04)


def test_excess_risk_holdout_matches_closed_form():
    t = np.array([0.5, -0.25, 0.0, 0.25, 0.0, 0.0])
    data = make_data(d=6, N=80, sigma=1.0, t=t, seed=15)
    sol = erm_linear(ConvexBody("l1_ball", 6, 1.0), data)
    closed = excess_risk(sol, data)
    est, stderr = excess_risk_holdout(sol, data, holdout=60_000, seed=16)
    assert abs(est - closed) <= 3.0 * stderr
