"""Lower-bound mechanisms: indistinguishability and the gaussian shift
====================================================================

Upper bounds on ERM mean little without matching lower bounds.  Two
mechanisms make the lower bounds concrete, and both can be run as
falsifiable numerical experiments rather than proofs:

  * Two-point indistinguishability.  When N < d the design has a kernel, so
    the body contains a pair h, -h producing *identical* datasets.  Any
    estimator answers with one point, which must be at least ||h|| away
    from one of the two targets.  The demo runs the literal experiment: it
    builds the two datasets, checks they agree, and charges the estimator
    its worst-case error.  No estimator - ERM included - escapes the bound.

  * The gaussian shift bound.  If a set captures mass alpha under one
    gaussian, a second gaussian whose mean is `shift` standard deviations
    away still gives it mass at least 1 - Phi(Phi^{-1}(1-alpha) + shift);
    halfspaces achieve equality.  Monte Carlo on a halfspace shows the
    equality to three decimals.  Chaining this bound through disjoint
    acceptance regions yields the accuracy/confidence floor
    c sigma^2 log(1/delta)/N, which the last section compares against the
    empirical quantiles of ERM's excess risk.

Run:
    python demos/minimax_demos.py
"""

import numpy as np

from ermlab import ConvexBody, gaussian_shift_bound, two_point_minimax_demo
from ermlab.diagnostics import confidence_accuracy_curve, erm_estimator
from ermlab.rng import derive_rng
from ermlab.sim import DesignSpec


def two_point(d=8, N=4, seeds=6):
    body = ConvexBody("l1_ball", d, 1.0)
    design = DesignSpec("gaussian", d=d)
    zero = lambda X, Y: np.zeros(d)
    erm = erm_estimator(body)
    print(f"two-point demo on B_1^{d}, N={N} (kernel dimension {d - N}):")
    for s in range(seeds):
        X = design.sample(N, derive_rng(s, "design"))
        for name, est in (("zero", zero), ("erm ", erm)):
            rep, bound = two_point_minimax_demo(est, body, X, noise_seed=s)
            print(f"  seed {s} {name}: reported {rep:.4f} >= bound "
                  f"{bound:.4f}  ({'ok' if rep >= bound - 1e-9 else 'VIOLATION'})")


def shift_table():
    print("\ngaussian shift bound vs halfspace Monte Carlo (1e5 draws):")
    rng = derive_rng(2024, "demo-shift")
    x = rng.standard_normal(100_000)
    from scipy.stats import norm
    for alpha in (0.1, 0.5, 0.9):
        for shift in (0.5, 1.95996):
            b = float(norm.ppf(1.0 - alpha))
            emp_v = float(np.mean(x >= b + shift))
            bound = gaussian_shift_bound(alpha, shift)
            print(f"  alpha={alpha:4.2f} shift={shift:7.5f}: bound {bound:.4f}"
                  f"  MC {emp_v:.4f}  gap {abs(emp_v - bound):.4f}")


def confidence_curve(d=16, N=64, sigma=1.0, trials=200):
    body = ConvexBody("l1_ball", d, 1.0)
    design = DesignSpec("gaussian", d=d)
    rows = confidence_accuracy_curve(erm_estimator(body), body, design,
                                     sigma, N, trials,
                                     deltas=(0.5, 0.1, 0.02), seed=31)
    print(f"\naccuracy/confidence curve, ERM on B_1^{d}, N={N}, "
          f"sigma={sigma} ({trials} trials):")
    print(f"{'delta':>7} {'empirical quantile':>19} {'lower bound':>12} "
          f"{'ratio':>7}")
    for r in rows:
        print(f"{r['delta']:7.2f} {r['quantile']:19.4f} "
              f"{r['lower_bound']:12.4f} "
              f"{r['quantile'] / r['lower_bound']:7.2f}")


if __name__ == "__main__":
    two_point()
    shift_table()
    confidence_curve()
