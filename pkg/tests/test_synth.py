import json
import math

import numpy as np
import pytest

from krrselect.kernel import Dataset, GaussianKernel, TrigMercerKernel, cross_gram, gram_matrix, trig_eigenvalues, trig_features
from krrselect.spectral import KrrModel, build_cache, krr_solve
from krrselect.synth import (
    SourceTruth,
    eval_truth,
    generate_trial,
    make_truth,
    mode_frequencies,
    population_errors,
    population_errors_path,
    truth_norms,
)


def test_mode_frequencies():
    np.testing.assert_array_equal(mode_frequencies(3), [0, 1, 1, 2, 2, 3, 3])


@pytest.mark.parametrize("profile", ["flat", "harmonic"])
def test_source_condition_identities(profile):
    t = make_truth(2.0, 0.5, 2000, seed=1, profile=profile)
    assert np.sum(t.coeffs_c**2 / t.mu) == pytest.approx(1.0, rel=1e-12)
    assert np.sum(t.h_coeffs**2) == pytest.approx(1.0, rel=1e-12)
    t1 = make_truth(2.0, 1.0, 2000, seed=1, profile=profile)
    assert np.sum(t1.coeffs_c**2 / t1.mu) <= 1.0
    assert np.sum(t1.coeffs_c**2 / t1.mu**2) == pytest.approx(1.0, rel=1e-12)
    assert t.s == 0.5


@pytest.mark.parametrize("r", [0.49, 1.01, -1.0])
def test_make_truth_rejects_r(r):
    with pytest.raises(ValueError):
        make_truth(2.0, r)


def test_make_truth_rejects_profile():
    with pytest.raises(ValueError):
        make_truth(2.0, 0.5, 10, profile="steep")


def test_make_truth_deterministic():
    a, b = make_truth(2.0, 0.75, 300, seed=9), make_truth(2.0, 0.75, 300, seed=9)
    assert np.array_equal(a.coeffs_c, b.coeffs_c)
    assert a.to_json() == b.to_json()
    assert not np.array_equal(a.coeffs_c, make_truth(2.0, 0.75, 300, seed=10).coeffs_c)


def test_truth_json_fields():
    doc = json.loads(make_truth(2.0, 0.5, 50, seed=4).to_json())
    assert set(doc) >= {"a", "r", "J", "seed", "coeffs_digest"}
    assert doc["a"] == 2.0 and doc["J"] == 50 and doc["seed"] == 4


def test_population_effective_dimension_exponent():
    mu = trig_eigenvalues(TrigMercerKernel(2.0, 2000))
    lams = np.logspace(-4, -1, 13)
    nl = np.array([np.sum(mu / (mu + lam)) for lam in lams])
    slope = np.polyfit(np.log(lams), np.log(nl), 1)[0]
    assert -0.6 <= slope <= -0.4


def test_eval_truth_special_cases():
    spec = TrigMercerKernel(2.0, 5)
    mu = trig_eigenvalues(spec)
    zero = SourceTruth(spec, mu, np.zeros(11), 0.5, 0)
    assert eval_truth(zero, 0.3) == 0.0
    const = np.zeros(11)
    const[0] = 2.5
    np.testing.assert_allclose(eval_truth(SourceTruth(spec, mu, const, 0.5, 0), [0.0, 0.4, 1.0]), 2.5)
    with pytest.raises(ValueError):
        eval_truth(zero, 1.5)


def test_eval_truth_term_by_term():
    t = make_truth(2.0, 0.5, 40, seed=2)
    for x in (0.0, 0.123, 0.5, 0.999):
        total = t.coeffs_c[0]
        for m in range(1, 41):
            total += t.coeffs_c[2 * m - 1] * math.sqrt(2) * math.cos(2 * math.pi * m * x)
            total += t.coeffs_c[2 * m] * math.sqrt(2) * math.sin(2 * math.pi * m * x)
        assert eval_truth(t, x) == pytest.approx(total, abs=1e-12)


def test_generate_trial_noiseless_and_deterministic():
    t = make_truth(2.0, 0.5, 100, seed=0)
    clean = generate_trial(t, 50, 0.0, seed=3)
    np.testing.assert_array_equal(clean.dataset.ys, eval_truth(t, clean.dataset.xs))
    a, b = generate_trial(t, 50, 0.1, 3), generate_trial(t, 50, 0.1, 3)
    assert np.array_equal(a.dataset.xs, b.dataset.xs) and np.array_equal(a.dataset.ys, b.dataset.ys)
    assert np.all((a.dataset.xs >= 0) & (a.dataset.xs <= 1))


def test_generate_trial_rejects():
    t = make_truth(2.0, 0.5, 10)
    with pytest.raises(ValueError):
        generate_trial(t, 0, 0.1, 0)
    with pytest.raises(ValueError):
        generate_trial(t, 10, -0.1, 0)


def test_noise_level_monte_carlo():
    t = make_truth(2.0, 0.5, 200, seed=0)
    trial = generate_trial(t, 100_000, 0.1, seed=5)
    resid = trial.dataset.ys - eval_truth(t, trial.dataset.xs)
    assert 0.098 <= np.std(resid) <= 0.102


def test_population_errors_zero_model():
    t = make_truth(2.0, 0.5, 100, seed=1)
    data = generate_trial(t, 20, 0.1, 1).dataset
    model = KrrModel(1.0, np.zeros(20), np.zeros(20), t.kernel)
    assert population_errors(t, model, data) == pytest.approx(truth_norms(t), rel=1e-14)
    rho, k = truth_norms(t)
    assert k == pytest.approx(1.0, rel=1e-12)  # r = 1/2 pins ||f||_K = ||g|| = 1


def test_population_errors_exact_reproduction():
    # a truth inside the span of the sample: c_j = mu_j sum_i alpha_i phi_j(x_i)
    spec = TrigMercerKernel(2.0, 30)
    mu = trig_eigenvalues(spec)
    xs = np.linspace(0.05, 0.95, 7)
    alpha = np.random.default_rng(0).standard_normal(7)

    c = mu * (trig_features(spec, xs).T @ alpha)
    t = SourceTruth(spec, mu, c, 0.5, 0)

    model = KrrModel(1.0, alpha, np.zeros(7), spec)
    err = population_errors(t, model, Dataset(xs, np.zeros(7)))
    assert err[0] == pytest.approx(0.0, abs=1e-13) and err[1] == pytest.approx(0.0, abs=1e-12)


def test_population_errors_monte_carlo_quadrature():
    t = make_truth(2.0, 0.5, 300, seed=3)
    trial = generate_trial(t, 300, 0.1, seed=8)
    data = trial.dataset
    cache = build_cache(gram_matrix(t.kernel, data.xs), data.ys, kernel=t.kernel)
    model = krr_solve(cache, data.ys, 1e-3)
    err_rho, err_k = population_errors(t, model, data)
    u = np.random.default_rng(99).uniform(0, 1, 200_000)
    sq = 0.0
    for chunk in np.array_split(u, 100):
        sq += np.sum((cross_gram(t.kernel, chunk, data.xs) @ model.alpha - eval_truth(t, chunk)) ** 2)
    mc = sq / len(u)
    assert err_rho**2 == pytest.approx(mc, rel=0.02)
    assert err_k >= err_rho


def test_population_errors_kernel_mismatch():
    t = make_truth(2.0, 0.5, 10, seed=0)
    data = generate_trial(t, 5, 0.1, 0).dataset
    with pytest.raises(ValueError):
        population_errors(t, KrrModel(1.0, np.zeros(5), np.zeros(5), GaussianKernel(0.2)), data)
    with pytest.raises(ValueError):
        population_errors(t, KrrModel(1.0, np.zeros(4), np.zeros(4), t.kernel), data)


def test_norm_ordering_on_path():
    t = make_truth(2.0, 1.0, 500, seed=4)
    data = generate_trial(t, 120, 0.1, 2).dataset
    cache = build_cache(gram_matrix(t.kernel, data.xs), data.ys)
    alphas = np.stack([krr_solve(cache, data.ys, lam).alpha for lam in np.logspace(-5, 0, 20)], axis=1)
    rho, k = population_errors_path(t, data.xs, alphas)
    assert np.all(k >= rho)


@pytest.mark.parametrize("r", [0.5, 0.75, 1.0])
@pytest.mark.parametrize("profile", ["flat", "harmonic"])
def test_truncation_adequacy(r, profile):
    t = make_truth(2.0, r, 2000, seed=0, profile=profile)
    c2 = t.coeffs_c**2
    tail = c2[int(0.9 * len(c2)):].sum()
    assert tail <= 1e-4 * c2.sum()


def test_end_to_end_bitwise_reproducible():
    def run():
        t = make_truth(2.0, 0.5, 300, seed=5)
        data = generate_trial(t, 80, 0.1, 6).dataset
        cache = build_cache(gram_matrix(t.kernel, data.xs), data.ys)
        return population_errors_path(t, data.xs, krr_solve(cache, data.ys, 0.01).alpha)

    a, b = run(), run()
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
