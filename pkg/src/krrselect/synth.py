"""Synthetic regression problems with a known source condition and capacity.

The target lives in the span of the trigonometric Mercer system::

    f_rho = sum_j c_j phi_j,     c_j = mu_j^r g_j,     ||g||_2 = 1,

so ``f_rho = L_K^r h_rho`` with ``h_rho = sum_j g_j phi_j`` and
``||h_rho||_rho = 1``.  Covariates are uniform on [0, 1], which makes
``phi_j`` exactly orthonormal in ``L^2(rho_X)``; population errors are then
finite sums over Mercer coefficients.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .kernel import Dataset, TrigMercerKernel, trig_eigenvalues, trig_features
from .spectral import KrrModel

__all__ = [
    "SourceTruth",
    "TrialData",
    "make_truth",
    "eval_truth",
    "generate_trial",
    "population_errors",
    "population_errors_path",
    "mode_frequencies",
]

Profile = Literal["flat", "harmonic"]


def mode_frequencies(num_pairs: int) -> NDArray[np.int64]:
    """Frequency ``m`` of each mode: ``[0, 1, 1, 2, 2, ...]``."""
    return np.concatenate([[0], np.repeat(np.arange(1, num_pairs + 1), 2)])


@dataclass(frozen=True, eq=False)
class SourceTruth:
    """Regression function ``f_rho`` in Mercer coordinates."""

    kernel: TrigMercerKernel
    mu: NDArray[np.float64]
    coeffs_c: NDArray[np.float64]
    r: float
    seed: int
    profile: Profile = "harmonic"

    @property
    def s(self) -> float:
        return 1.0 / self.kernel.decay_a

    @property
    def h_coeffs(self) -> NDArray[np.float64]:
        return self.coeffs_c / self.mu**self.r

    def to_json(self) -> str:
        digest = hashlib.sha256(np.ascontiguousarray(self.coeffs_c).tobytes()).hexdigest()
        doc = {
            "a": self.kernel.decay_a,
            "r": self.r,
            "J": self.kernel.num_pairs,
            "seed": self.seed,
            "profile": self.profile,
            "coeffs_digest": digest,
        }
        return json.dumps(doc, sort_keys=True)


@dataclass(frozen=True, eq=False)
class TrialData:
    truth: SourceTruth
    dataset: Dataset
    sigma: float
    seed: int


def make_truth(a: float, r: float, J: int = 2000, seed: int = 0, profile: Profile = "harmonic") -> SourceTruth:
    """Draw a random target with smoothness ``r`` for the kernel ``trig:a:J``.

    ``g`` is a Gaussian vector normalised to unit length.  With
    ``profile="flat"`` all modes have the same variance; ``"harmonic"`` gives
    mode frequency ``m`` variance proportional to ``1/max(m, 1)``, which puts
    bias mass at every scale so the source condition is sharp.
    """
    if not 0.5 <= r <= 1.0:
        raise ValueError(f"r must lie in [1/2, 1], got {r}")
    kernel = TrigMercerKernel(a, J)
    mu = trig_eigenvalues(kernel)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(kernel.num_modes)
    if profile == "harmonic":
        g /= np.sqrt(np.maximum(mode_frequencies(J), 1))
    elif profile != "flat":
        raise ValueError(f"unknown profile {profile!r}")
    g /= np.linalg.norm(g)
    return SourceTruth(kernel, mu, mu**r * g, float(r), int(seed), profile)


def eval_truth(truth: SourceTruth, x: ArrayLike) -> NDArray[np.float64] | float:
    """``f_rho(x) = sum_j c_j phi_j(x)``; scalar in, scalar out."""
    scalar = np.ndim(x) == 0
    values = trig_features(truth.kernel, np.atleast_1d(x)) @ truth.coeffs_c
    return float(values[0]) if scalar else values


def generate_trial(truth: SourceTruth, n: int, sigma: float, seed: int) -> TrialData:
    """``n`` uniform covariates with ``y = f_rho(x) + N(0, sigma^2)``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not sigma >= 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, int(n))
    noise = rng.standard_normal(int(n))
    y = eval_truth(truth, x) + sigma * noise
    return TrialData(truth, Dataset(x, y), float(sigma), int(seed))


def population_errors_path(
    truth: SourceTruth, xs: ArrayLike, alphas: ArrayLike, features: NDArray | None = None
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Population errors for several coefficient vectors at once.

    ``alphas`` has shape ``(n,)`` or ``(n, m)``.  The estimator
    ``sum_i alpha_i K(x_i, .)`` has Mercer coefficient ``mu_j sum_i alpha_i phi_j(x_i)``.
    Returns ``(err_rho, err_K)`` arrays of length ``m``.
    """
    phi = trig_features(truth.kernel, xs) if features is None else features
    a = np.asarray(alphas, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] != phi.shape[0]:
        raise ValueError("alphas do not match the number of covariates")
    diff = truth.mu[:, None] * (phi.T @ a) - truth.coeffs_c[:, None]
    err_rho = np.sqrt(np.sum(diff**2, axis=0))
    err_k = np.sqrt(np.sum(diff**2 / truth.mu[:, None], axis=0))
    return err_rho, err_k


def population_errors(truth: SourceTruth, model: KrrModel, dataset: Dataset) -> tuple[float, float]:
    """``(||f - f_rho||_rho, ||f - f_rho||_K)`` for a fitted model, exact on the truncation."""
    if model.kernel is not None and model.kernel != truth.kernel:
        raise ValueError(f"model kernel {model.kernel} does not match truth kernel {truth.kernel}")
    if len(model.alpha) != dataset.n:
        raise ValueError("model was not fitted on this dataset")
    err_rho, err_k = population_errors_path(truth, dataset.xs, model.alpha)
    return float(err_rho[0]), float(err_k[0])


def truth_norms(truth: SourceTruth) -> tuple[float, float]:
    """``(||f_rho||_rho, ||f_rho||_K)``."""
    c = truth.coeffs_c
    return math.sqrt(float(c @ c)), math.sqrt(float(np.sum(c * c / truth.mu)))
