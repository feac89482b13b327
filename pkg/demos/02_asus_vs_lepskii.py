"""Compare the early-stopping rule with the pairwise Lepskii rule.

Both rules look at differences of estimators along a grid of lambdas.  The
early-stopping rule scans a uniform grid from small lambda upwards and stops
the first time a successive difference exceeds its threshold; the pairwise
rule checks every smaller lambda for each candidate.  We run both on the
same data with their default grids and count the norm comparisons.

Run:  python3 demos/02_asus_vs_lepskii.py
"""

import numpy as np

from krrselect import (
    asus_select,
    build_cache,
    estimate_noise,
    geometric_grid,
    gram_matrix,
    lp_select,
    make_truth,
    sup_norm_kappa,
    uniform_grid,
)
from krrselect.bench import CALIBRATED_C_LP, CALIBRATED_C_SCALE
from krrselect.synth import generate_trial, population_errors_path

n = 1024
truth = make_truth(a=2.0, r=0.5, seed=3)
data = generate_trial(truth, n, sigma=0.1, seed=4).dataset
cache = build_cache(gram_matrix(truth.kernel, data.xs), data.ys, kernel=truth.kernel)
kappa = sup_norm_kappa(truth.kernel)
noise = estimate_noise(cache, data.ys)
print(f"estimated noise level {noise.M:.4f} (true 0.1)")

uni = uniform_grid(cache, b=1, cap=400, kappa=kappa)
geo = geometric_grid(cache, q=0.5, kappa=kappa)
print(f"uniform grid: {len(uni)} values, geometric grid: {len(geo)} values")

asus = asus_select(cache, data.ys, uni, noise, c_scale=CALIBRATED_C_SCALE, kappa=kappa)
lp = lp_select(cache, data.ys, geo, noise, c_lp=CALIBRATED_C_LP, kappa=kappa)

# the ideal grid value, using the known truth
path = np.stack([cache.eigenvectors @ cache.coords(data.ys, lam) for lam in uni.values], axis=1)
err_rho, _ = population_errors_path(truth, data.xs, path)
best = int(np.argmin(err_rho))

for res in (asus, lp):
    e = population_errors_path(truth, data.xs, res.alpha_hat)[0][0]
    print(f"{res.rule:>5}: lambda = {res.chosen_lambda:.4g}  err_rho = {e:.4f}  "
          f"comparisons = {res.comparison_count}  fallback = {res.fallback_used}")
print(f"oracle: lambda = {uni.values[best]:.4g}  err_rho = {err_rho[best]:.4f}")

print("\nearly-stopping trace (last five steps before the stop):")
for s in asus.steps[-5:]:
    print(f"  k = {s.k:3d}  d_k = {s.d:.3e}  tau_k = {s.tau:.3e}  N_D = {s.eff_dim:6.1f}")
