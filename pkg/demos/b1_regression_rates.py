"""ERM over the l1 ball: measured risk against the predicted rate
================================================================

The flagship experiment: constrained least squares over B_1^64 with unit
gaussian noise and a 16-sparse boundary target, across N = 32..1024 with
many trials per cell.  For each cell the harness also solves the fixed
points, so the output compares

    median excess risk   vs   (s*)^2 = predicted residue,

and fits the empirical rate exponent on a log-log scale (the theory says
roughly N^{-1/2} with a logarithmic correction, so the fitted slope should
land near -0.5).

The full 200-trial version of this run is what the acceptance suite checks
against frozen constants; here a lighter 40-trial pass keeps the demo under
a minute.  Outputs land in ./out_b1_rates/ as a fixed-schema CSV plus a
JSON summary; rerunning with the same seed reproduces the CSV byte for
byte.

Run:
    python demos/b1_regression_rates.py
"""

from ermlab import fit_rate, presets, run_experiment

OUT = "./out_b1_rates"


def main():
    cfg = presets()["b1_rates"]
    cfg.trials = 40                      # demo-sized; acceptance runs 200
    rows, summary = run_experiment(cfg, out_dir=OUT, threads=1)

    print(f"rows: {summary['n_rows']}, failures: {summary['n_failures']}")
    print(f"{'N':>6} {'median excess':>14} {'(s*)^2':>9} {'ratio':>7} "
          f"{'iso freq':>9}")
    for cell in summary["cells"]:
        s_sq = next(r.s_star**2 for r in rows if r.cell == cell["cell"])
        iso = "-" if cell["iso_frequency"] is None else f"{cell['iso_frequency']:.2f}"
        print(f"{cell['N']:6d} {cell['median_excess']:14.5f} {s_sq:9.5f} "
              f"{cell['median_excess'] / s_sq:7.3f} {iso:>9}")

    slope, intercept, r2 = fit_rate(rows)
    print(f"\nlog-log rate fit: slope {slope:.3f} (r^2 {r2:.3f}); "
          f"outputs in {OUT}/")


if __name__ == "__main__":
    main()
