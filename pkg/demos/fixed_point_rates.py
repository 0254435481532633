"""Complexity fixed points and the rates they predict
=====================================================

Constrained least squares over a convex symmetric class has two natural
scales, both defined through the localized width profile H(r):

  * r*(Q):  H(r) = Q r sqrt(N)   - the intrinsic, noise-free scale; below
    it the design cannot distinguish class members on the sample;
  * s*(eta): H(s) = eta s^2 sqrt(N), eta ~ 1/sigma - the scale at which the
    interaction between the noise and the class stops dominating.

The predicted excess-risk residue is (s*)^2 when the noise is above the
intrinsic scale and (r*)^2 otherwise.  This script solves both fixed points
by bisection over a grid of sample sizes and compares (s*)^2 against the
closed-form benchmarks:

    l1 ball:   (s*)^2 ~ sigma sqrt(log(e d^2 sigma^2 / N) / N)
    max-norm:  (s*)^2 ~ sigma sqrt((p+q)/N)

Run:
    python demos/fixed_point_rates.py
"""

import numpy as np

from ermlab import ConvexBody, FixedPointQuery, predicted_rate, solve_fixed_point

SEED = 11


def l1_table(d=64, sigma=1.0):
    body = ConvexBody("l1_ball", d, 1.0)
    print(f"\nl1 ball d={d}, sigma={sigma}")
    print(f"{'N':>6} {'s*':>8} {'(s*)^2':>9} {'benchmark':>10} {'ratio':>7} "
          f"{'r*':>9} {'regime':>10}")
    for N in (32, 64, 128, 256, 512, 1024):
        pred = predicted_rate(body, N, sigma, trials=400, seed=SEED)
        bench = sigma * np.sqrt(np.log(np.e * d * d * sigma**2 / N) / N)
        print(f"{N:6d} {pred.s_star:8.4f} {pred.s_star**2:9.4f} "
              f"{bench:10.4f} {pred.s_star**2 / bench:7.3f} "
              f"{pred.r_star:9.5f} {pred.regime:>10}")


def maxnorm_table(p=6, q=6, sigma=1.0):
    body = ConvexBody("maxnorm_ball", (p, q), 1.0)
    print(f"\nmax-norm ball p=q={p}, sigma={sigma}")
    print(f"{'N':>6} {'(s*)^2':>9} {'sigma*sqrt((p+q)/N)':>20} {'ratio':>7}")
    for N in (64, 128, 256):
        pred = predicted_rate(body, N, sigma, trials=400, seed=SEED)
        bench = sigma * np.sqrt((p + q) / N)
        print(f"{N:6d} {pred.s_star**2:9.4f} {bench:20.4f} "
              f"{pred.s_star**2 / bench:7.3f}")


def solver_anatomy():
    body = ConvexBody("l1_ball", 64, 1.0)
    res = solve_fixed_point(body, FixedPointQuery("s_star", N=256, eta=1.0),
                            trials=400, seed=SEED)
    print("\nanatomy of one solve (l1 d=64, N=256, eta=1):")
    print(f"  value    = {res.value:.5f}")
    print(f"  residual = {res.residual:.2e}  (estimator stderr "
          f"{res.stderr:.2e})")
    print(f"  bracket  = [{res.bracket[0]:.5f}, {res.bracket[1]:.5f}]")
    print(f"  clipped  = {res.clipped}, width evaluations = {res.evaluations}")


if __name__ == "__main__":
    l1_table()
    maxnorm_table()
    solver_anatomy()
