"""A small learning-rate experiment.

For a target of smoothness r and a kernel with capacity s, the selected
estimator should converge like n^(-r/(2r+s)) in L2.  This demo runs a
reduced version of the acceptance experiment (fewer trials and sizes) and
prints median errors with the fitted log-log slopes.

The full experiment is ``krrselect simulate --out rates.csv``.

Run:  python3 demos/03_rate_experiment.py
"""

from krrselect.bench import ExperimentConfig, run_rate_experiment

config = ExperimentConfig(selectors=("asus", "lp"), sizes=(128, 256, 512, 1024), trials=5, r=0.5)
report = run_rate_experiment(config)

print(f"{'selector':>9} {'n':>6} {'median err_rho':>15} {'median lambda':>14}")
for row in report.summary:
    print(f"{row['selector']:>9} {row['n']:6d} {row['median_err_rho']:15.4f} {row['median_lambda']:14.3g}")

print()
theory = report.slopes["theory"]["rho"]
for name in ("oracle", "asus", "lp"):
    fit = report.slopes[name]["rho"]
    print(f"{name:>7}: slope {fit['slope']:+.3f} +- {fit['stderr']:.3f}   (theory {theory:+.3f})")
