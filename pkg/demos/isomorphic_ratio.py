"""The ratio process: where empirical risk stops being trustworthy
================================================================

The standard route to ERM rates controls, uniformly over class members with
mean excess loss above a level lambda, the ratio of the empirical excess
loss to its mean.  When the worst ratio deviation stays below 1/2, the
empirical and population excess losses are equivalent up to a factor
[1/2, 3/2] on that localized set, and the minimizer's level is pinned.

This demo probes the *failure* of that equivalence at the fixed-point level
itself.  The model makes the response an independent standard gaussian, so
the class minimizer is 0 and the mean excess loss of <t, .> is just
||t||^2.  With d = 32 and only N = 64 samples, a multi-start local search
over class members at level lambda reliably finds ratio deviations well
above 1/2 (the search reports a lower bound on the true supremum, so the
failures it finds are real).  The deviation shrinks as lambda grows: the
equivalence is a statement about scale.

A companion sanity check runs the realizable case, where the equivalence
must and does hold.

Run:
    python demos/isomorphic_ratio.py
"""

import numpy as np

from ermlab import ConvexBody, RatioQuery, ratio_sup_estimate
from ermlab.diagnostics import isomorphic_event_check
from ermlab.fixed_points import FixedPointQuery, solve_fixed_point
from ermlab.sim import DesignSpec, NoiseSpec, sample_dataset

D, N, SEEDS = 32, 64, 20


def failure_at_fixed_point():
    body = ConvexBody("l1_ball", D, 1.0)
    design = DesignSpec("gaussian", d=D)
    s_res = solve_fixed_point(body, FixedPointQuery("s_star", N=N, eta=1.0),
                              trials=400, seed=4)
    lam0 = s_res.value**2
    print(f"d={D}, N={N}, orthogonal gaussian target; s* = {s_res.value:.4f}"
          f" so the fixed-point level is lambda0 = {lam0:.4f}\n")
    print(f"{'lambda/lambda0':>15} {'mean ratio-sup':>15} "
          f"{'fraction > 1/2':>15}")
    for scale in (0.5, 1.0, 2.0):
        vals = []
        for s in range(SEEDS):
            data = sample_dataset(design, NoiseSpec("orthogonal_target"),
                                  None, N, seed=1000 + s)
            vals.append(ratio_sup_estimate(
                RatioQuery(lam=lam0 * scale, m=64, ascent_steps=60,
                           body=body), data, seed=s))
        vals = np.array(vals)
        print(f"{scale:15.2f} {vals.mean():15.3f} "
              f"{np.mean(vals > 0.5):15.2f}")


def sanity_realizable():
    d, n = 8, 4096
    body = ConvexBody("l1_ball", d, 1.0)
    t = np.zeros(d)
    t[:2] = 0.4
    data = sample_dataset(DesignSpec("gaussian", d=d),
                          NoiseSpec("gaussian_noise", 0.0), t, n, seed=3)
    holds, worst = isomorphic_event_check(data, body, lam=0.05, m=48,
                                          ascent_steps=40, seed=3)
    print(f"\nrealizable sanity (d={d}, N={n}, sigma=0): worst ratio "
          f"{worst:.4f}, equivalence holds: {holds}")


if __name__ == "__main__":
    failure_at_fixed_point()
    sanity_realizable()
