"""Walk along the KRR regularization path of one synthetic dataset.

One eigendecomposition of the Gram matrix gives every lambda on the path
for O(n^2) each.  We print the effective dimension, the RKHS norm of the
estimator, the training residual and the true population error, so the
bias/variance trade-off is visible in a single table.

Run:  python3 demos/01_regularization_path.py
"""

import numpy as np

from krrselect import build_cache, effective_dimension, gram_matrix, krr_solve, make_truth
from krrselect.synth import generate_trial, population_errors

truth = make_truth(a=2.0, r=0.5, J=2000, seed=0)
trial = generate_trial(truth, n=512, sigma=0.1, seed=1)
data = trial.dataset

cache = build_cache(gram_matrix(truth.kernel, data.xs), data.ys, kernel=truth.kernel)
print(f"n = {data.n}, top eigenvalues: {np.round(cache.eigenvalues[:5], 2)}")
print()
print(f"{'lambda':>10} {'N_D':>8} {'||f||_K':>9} {'resid_D':>9} {'err_rho':>9} {'err_K':>9}")

for lam in np.logspace(-6, 0, 13):
    model = krr_solve(cache, data.ys, lam)
    rkhs = cache.rkhs_norm_coords(cache.coords(data.ys, lam))
    resid = np.sqrt(np.mean((data.ys - model.fitted_values) ** 2))
    err_rho, err_k = population_errors(truth, model, data)
    print(f"{lam:10.1e} {effective_dimension(cache, lam):8.1f} {rkhs:9.3f} {resid:9.4f} {err_rho:9.4f} {err_k:9.4f}")

# Small lambda: N_D near n, tiny residual, large error (overfitting).
# Large lambda: N_D near 1, residual near the signal size (underfitting).
