"""Empirical risk minimization over linear classes indexed by a convex body.

Three solvers:

* ``erm_linear`` - projected gradient descent with backtracking for the
  closed-form bodies (l1/l2/linf).
* ``erm_frank_wolfe_atoms`` - Frank-Wolfe with exact line search over the
  sign-atom hull, the reference solver for the max-norm problem.
* ``erm_maxnorm_factorized`` - multi-start alternating projected gradient on
  a factorization (U, V) with row-wise l2 ball constraints, which keeps
  every iterate inside the max-norm ball by construction.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import AtomOracle, ConvexBody, ConvergenceError, project
from .rng import derive_rng
from .sim import Dataset, ModelError, sample_dataset


@dataclass
class ErmConfig:
    max_iter: int = 50_000
    tol: float = 1e-8               # projected-gradient norm at exit
    power_iters: int = 30           # Lipschitz estimate
    backtrack: float = 0.5
    x0: np.ndarray = None
    gap_tol: float = 1e-6           # Frank-Wolfe duality gap
    restarts: int = 8               # factorized multi-start
    alt_iters: int = 600            # alternating sweeps
    slack: float = 1e-9


@dataclass(frozen=True)
class ErmSolution:
    t_hat: np.ndarray
    empirical_risk: float
    iterations: int
    solver: str
    certificate: float              # stationarity residual / duality gap


def _risk(X, Y, t):
    r = Y - X @ t
    return float(r @ r) / X.shape[0]


def _lipschitz_estimate(H, iters: int) -> float:
    rng = derive_rng(0, "power-iteration")
    v = rng.standard_normal(H.shape[0])
    v /= np.linalg.norm(v)
    lam = 1.0
    for _ in range(iters):
        w = H @ v
        n = np.linalg.norm(w)
        if n == 0:
            return 1.0
        lam, v = n, w / n
    return float(lam)


def erm_linear(body: ConvexBody, data: Dataset, cfg: ErmConfig = None) -> ErmSolution:
    """Projected gradient descent with backtracking on the empirical risk.

    Stops when the projected-gradient norm (at the 1/L step) drops below
    ``cfg.tol``; hitting the iteration cap raises ``ConvergenceError`` with
    the final stationarity residual.
    """
    if body.kind == "maxnorm_ball":
        raise ModelError("use the factorized or atom solvers for maxnorm")
    cfg = cfg or ErmConfig()
    X, Y = data.X, data.Y
    N, d = X.shape
    H = (2.0 / N) * (X.T @ X)
    b = (2.0 / N) * (X.T @ Y)
    L = max(_lipschitz_estimate(H, cfg.power_iters), 1e-12)
    base_step = 1.0 / L

    t = np.zeros(d) if cfg.x0 is None else project(body, cfg.x0)
    risk_t = _risk(X, Y, t)
    pg_norm = np.inf
    for it in range(cfg.max_iter):
        grad = H @ t - b
        ref = project(body, t - base_step * grad)
        pg_norm = float(np.linalg.norm(t - ref)) / base_step
        if pg_norm <= cfg.tol:
            return ErmSolution(t_hat=t, empirical_risk=risk_t, iterations=it,
                               solver="pgd_backtracking", certificate=pg_norm)
        step = base_step
        for _ in range(60):
            u = ref if step == base_step else project(body, t - step * grad)
            du = u - t
            risk_u = _risk(X, Y, u)
            if risk_u <= risk_t + grad @ du + (du @ du) / (2.0 * step) + 1e-15:
                break
            step *= cfg.backtrack
        t, risk_t = u, risk_u
    raise ConvergenceError(
        f"PGD hit the {cfg.max_iter}-iteration cap", residual=pg_norm
    )


def erm_frank_wolfe_atoms(oracle: AtomOracle, data: Dataset, iters: int = 4000,
                          gap_tol: float = 1e-6, scale: float = 1.0) -> ErmSolution:
    """Pairwise Frank-Wolfe with exact line search over ``scale * conv(sign
    atoms)``, the reference solver for max-norm regression.

    Pairwise steps (mass moved from the worst active atom to the oracle
    atom) converge linearly for quadratics over a polytope, so the duality
    gap actually reaches ``gap_tol``; failing to do so raises
    ``ConvergenceError`` carrying the final gap.
    """
    X, Y = data.X, data.Y
    N, dim = X.shape
    if dim != oracle.p * oracle.q:
        raise ValueError("design width does not match the atom oracle shape")

    a = np.zeros(dim)                      # = 0.5*s0 + 0.5*(-s0): hull member
    resid = -Y.copy()                      # X a - Y
    weights: dict = {}
    atoms: dict = {}

    def risk_now():
        return float(resid @ resid) / N

    gap = np.inf
    for it in range(iters):
        grad = (2.0 / N) * (X.T @ resid)
        _, u, v = oracle.max_atom(-grad.reshape(oracle.p, oracle.q))
        s = scale * np.outer(u, v).reshape(-1)
        gap = float(-grad @ (s - a))
        if gap <= gap_tol:
            return ErmSolution(t_hat=a, empirical_risk=risk_now(),
                               iterations=it, solver="frank_wolfe_atoms",
                               certificate=gap)
        key_s = tuple(np.sign(s).astype(int))
        if not weights:
            weights = {key_s: 0.5, tuple(-np.sign(s).astype(int)): 0.5}
            atoms = {k: np.array(k, dtype=float) * abs(scale) for k in weights}
        # away atom: active atom most aligned with the gradient
        key_v = max(weights, key=lambda k: float(grad @ atoms[k]))
        v_vec = atoms[key_v]
        d_vec = s - v_vec
        gamma_max = weights[key_v]
        Xd = X @ d_vec
        denom = float(Xd @ Xd)
        if denom <= 0:
            break
        gamma = min(max(-float(grad @ d_vec) * N / (2.0 * denom), 0.0), gamma_max)
        if gamma <= 0:
            break
        weights[key_v] -= gamma
        if weights[key_v] <= 1e-14:
            del weights[key_v]
        weights[key_s] = weights.get(key_s, 0.0) + gamma
        atoms.setdefault(key_s, s.copy())
        a = a + gamma * d_vec
        resid = resid + gamma * Xd
    if gap <= gap_tol:
        return ErmSolution(t_hat=a, empirical_risk=risk_now(),
                           iterations=iters, solver="frank_wolfe_atoms",
                           certificate=gap)
    raise ConvergenceError(
        f"Frank-Wolfe gap {gap:.3e} above tolerance {gap_tol:.1e}", residual=gap
    )


def _project_rows(U, rmax):
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    shrink = np.minimum(1.0, rmax / np.maximum(norms, 1e-300))
    return U * shrink


def erm_maxnorm_factorized(p: int, q: int, data: Dataset, rank_k: int = None,
                           cfg: ErmConfig = None, radius: float = 1.0,
                           warm_start=None, seed=0) -> ErmSolution:
    """Multi-start alternating projected gradient on A = U V^T.

    Row-wise l2 balls of radius sqrt(radius) keep ``||U V^T||_max <= radius``
    for every iterate.  The best restart (ties to the lowest index) is
    returned; if no restart improves on its own starting objective a
    ``ConvergenceError`` is raised.
    """
    cfg = cfg or ErmConfig()
    if rank_k is None:
        rank_k = min(p, q)
    if rank_k < 1:
        raise ValueError("rank_k must be >= 1")
    X, Y = data.X, data.Y
    N, dim = X.shape
    if dim != p * q:
        raise ValueError("design width does not match (p, q)")
    rmax = float(np.sqrt(radius))

    starts = []
    if warm_start is not None:
        U0, V0 = warm_start
        starts.append((_project_rows(np.array(U0, dtype=float), rmax),
                       _project_rows(np.array(V0, dtype=float), rmax)))
    for j in range(cfg.restarts):
        rng = derive_rng(seed, "maxnorm-restart", j)
        U0 = rng.standard_normal((p, rank_k)) * (0.5 * rmax / np.sqrt(rank_k))
        V0 = rng.standard_normal((q, rank_k)) * (0.5 * rmax / np.sqrt(rank_k))
        starts.append((U0, V0))

    best = None
    any_descent = False
    for idx, (U, V) in enumerate(starts):
        U, V = U.copy(), V.copy()
        obj0 = _risk(X, Y, (U @ V.T).reshape(-1))
        obj = obj0
        step_u = step_v = 1.0
        for _ in range(cfg.alt_iters):
            # U block
            resid = X @ (U @ V.T).reshape(-1) - Y
            GA = (2.0 / N) * (X.T @ resid).reshape(p, q)
            GU = GA @ V
            for _ in range(40):
                U_new = _project_rows(U - step_u * GU, rmax)
                obj_new = _risk(X, Y, (U_new @ V.T).reshape(-1))
                if obj_new <= obj + 1e-15:
                    break
                step_u *= 0.5
            if obj_new <= obj + 1e-15:
                U, obj = U_new, obj_new
            step_u *= 1.3
            # V block
            resid = X @ (U @ V.T).reshape(-1) - Y
            GA = (2.0 / N) * (X.T @ resid).reshape(p, q)
            GV = GA.T @ U
            for _ in range(40):
                V_new = _project_rows(V - step_v * GV, rmax)
                obj_new = _risk(X, Y, (U @ V_new.T).reshape(-1))
                if obj_new <= obj + 1e-15:
                    break
                step_v *= 0.5
            if obj_new <= obj + 1e-15:
                V, obj = V_new, obj_new
            step_v *= 1.3
        if obj <= obj0 + 1e-15:
            any_descent = True
        if best is None or obj < best[0] - 1e-18:
            grad_res = float(np.linalg.norm(GU)) + float(np.linalg.norm(GV))
            best = (obj, (U @ V.T).reshape(-1), grad_res)
    if not any_descent:
        raise ConvergenceError("all factorized restarts failed the descent test")
    obj, t_hat, grad_res = best
    return ErmSolution(t_hat=t_hat, empirical_risk=obj,
                       iterations=cfg.alt_iters, solver="maxnorm_alternating",
                       certificate=grad_res)


def excess_risk(solution: ErmSolution, data: Dataset) -> float:
    """Population excess risk of the fitted parameter under the data's model.

    Isotropic design with target <t*, X> + noise: exactly
    ``||t_hat - t*||^2`` in the design's class metric.  Orthogonal target:
    ``||t_hat||^2`` (the class minimizer is 0).
    """
    meta = data.meta
    design = meta.get("design")
    noise = meta.get("noise")
    if design is None or noise is None:
        raise ModelError("dataset carries no synthetic model metadata")
    if noise.kind == "orthogonal_target":
        return design.class_l2_norm(solution.t_hat) ** 2
    if noise.kind == "gaussian_noise":
        t_star = meta.get("t_star")
        if t_star is None:
            raise ModelError("gaussian_noise model without t_star")
        return design.class_l2_norm(solution.t_hat - t_star) ** 2
    raise ModelError(f"unknown model kind {noise.kind!r}")


def excess_risk_holdout(solution: ErmSolution, data: Dataset, holdout: int = 4096,
                        seed=0):
    """Fresh-sample estimate of the excess risk, with its standard error."""
    meta = data.meta
    design, noise, t_star = meta["design"], meta["noise"], meta["t_star"]
    fresh = sample_dataset(design, noise, t_star, holdout, seed=seed)
    r_hat = (fresh.Y - fresh.X @ solution.t_hat) ** 2
    if noise.kind == "orthogonal_target":
        r_star = fresh.Y**2
    else:
        r_star = (fresh.Y - fresh.X @ t_star) ** 2
    diff = r_hat - r_star
    return float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(holdout))
