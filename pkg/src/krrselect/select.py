"""Candidate grids, concentration quantities and regularization selection rules.

Three rules are implemented:

``asus``
    Early-stopping scan over the uniform grid ``lambda_k = 1/(b k)`` from the
    smallest lambda upwards; stops at the first ``k`` where the difference of
    successive estimators reaches its variance-scaled threshold.
``lp``
    Pairwise Lepskii rule on the geometric grid ``lambda_k = q^k``: largest
    lambda whose estimator stays within the threshold of every estimator
    with smaller lambda.
``holdout``
    Validation-split baseline.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .kernel import Dataset, KernelSpec, cross_gram, gram_matrix
from .spectral import SpectralCache, build_cache, effective_dimension

__all__ = [
    "LambdaGrid",
    "NoiseModel",
    "SelectionStep",
    "SelectionResult",
    "c1_star",
    "w_quantity",
    "u_quantity",
    "uniform_grid",
    "geometric_grid",
    "estimate_noise",
    "asus_select",
    "lp_select",
    "holdout_select",
    "NOISE_FLOOR",
]

Mode = Literal["paper", "practical"]

NOISE_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class LambdaGrid:
    """Strictly decreasing candidate regularization levels.

    ``indices[i]`` is the grid index ``k`` of ``values[i]``: ``1..K*`` for the
    uniform kind, ``0..K_q`` for the geometric kind.  ``param`` is ``b`` or
    ``q`` respectively.
    """

    kind: Literal["uniform", "geometric"]
    param: float
    values: NDArray[np.float64]
    indices: NDArray[np.int64]
    mode: Mode

    @property
    def terminal_index(self) -> int:
        return int(self.indices[-1])

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class NoiseModel:
    """Bernstein noise parameters ``M`` and ``gamma``."""

    M: float
    gamma: float
    source: Literal["user", "estimated"] = "user"
    floored: bool = False

    def __post_init__(self):
        if not (self.M > 0 and self.gamma > 0):
            raise ValueError(f"noise parameters must be positive, got M={self.M}, gamma={self.gamma}")

    def scaled(self, c: float) -> "NoiseModel":
        return NoiseModel(self.M * c, self.gamma * c, self.source, self.floored)


@dataclass(frozen=True)
class SelectionStep:
    k: int
    lam: float
    d: float
    tau: float
    eff_dim: float
    w: float


@dataclass(frozen=True, eq=False)
class SelectionResult:
    rule: Literal["asus", "lp", "holdout"]
    chosen_index: int
    chosen_lambda: float
    alpha_hat: NDArray[np.float64]
    steps: list = field(default_factory=list)
    comparison_count: int = 0
    fallback_used: bool = False
    grid: Optional[LambdaGrid] = None

    @property
    def chosen_position(self) -> int:
        """Position of the chosen lambda inside ``grid.values``."""
        return int(np.flatnonzero(self.grid.indices == self.chosen_index)[0])


def c1_star(kappa: float) -> float:
    return max((kappa**2 + 1.0) / 3.0, 2.0 * math.sqrt(kappa**2 + 1.0))


def w_quantity(cache: SpectralCache, lam):
    """``1/(n sqrt(lam)) + (1 + 1/sqrt(lam n)) sqrt(max(N_D(lam), 1)/n)``."""
    n = cache.n
    lam_arr = np.asarray(lam, dtype=float)
    nd = np.maximum(effective_dimension(cache, lam_arr), 1.0)
    w = 1.0 / (n * np.sqrt(lam_arr)) + (1.0 + 1.0 / np.sqrt(lam_arr * n)) * np.sqrt(nd / n)
    return float(w) if np.ndim(w) == 0 else w


def u_quantity(cache: SpectralCache, lam, delta: float):
    """``sqrt(log(1 + 8 log(64/delta) max(1, N_D) / sqrt(lam n)) / (lam n))``."""
    _check_delta(delta)
    n = cache.n
    lam_arr = np.asarray(lam, dtype=float)
    nd = np.maximum(effective_dimension(cache, lam_arr), 1.0)
    ln = lam_arr * n
    u = np.sqrt(np.log1p(8.0 * math.log(64.0 / delta) * nd / np.sqrt(ln)) / ln)
    return float(u) if np.ndim(u) == 0 else u


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _kappa(cache: SpectralCache, kappa: Optional[float]) -> float:
    return cache.kappa_lower if kappa is None else float(kappa)


def _largest_valid(cache: SpectralCache, lams: NDArray, delta: float, kappa: float) -> int:
    """Position of the last lambda with ``C1* U <= 1/4``, or -1 if there is none."""
    ok = np.flatnonzero(c1_star(kappa) * u_quantity(cache, lams, delta) <= 0.25)
    return int(ok[-1]) if ok.size else -1


def uniform_grid(
    cache: SpectralCache,
    b: int = 1,
    delta: float = 0.05,
    mode: Mode = "practical",
    cap: int = 400,
    kappa: Optional[float] = None,
) -> LambdaGrid:
    """Uniform subdivision ``lambda_k = 1/(b k)``, ``k = 1..K*``.

    ``practical`` mode: ``K* = min(n // b, cap)``.  ``paper`` mode: ``K*`` is
    the largest ``k`` in that range with ``C1* U_{D, lambda_k, delta} <= 1/4``.
    ``K* >= 1`` is always enforced.
    """
    if int(b) != b or b < 1:
        raise ValueError(f"b must be a positive integer, got {b}")
    if int(cap) != cap or cap < 1:
        raise ValueError(f"cap must be a positive integer, got {cap}")
    _check_delta(delta)
    kmax = max(min(cache.n // int(b), int(cap)), 1)
    ks = np.arange(1, kmax + 1)
    lams = 1.0 / (b * ks)
    if mode == "paper":
        last = _largest_valid(cache, lams, delta, _kappa(cache, kappa))
        ks, lams = ks[: max(last + 1, 1)], lams[: max(last + 1, 1)]
    elif mode != "practical":
        raise ValueError(f"unknown mode {mode!r}")
    return LambdaGrid("uniform", int(b), lams, ks, mode)


def geometric_grid(
    cache: SpectralCache,
    q: float = 0.5,
    delta: float = 0.05,
    mode: Mode = "practical",
    cap: int = 400,
    kappa: Optional[float] = None,
) -> LambdaGrid:
    """Geometric grid ``lambda_k = q^k``, ``k = 0..K_q``, with ``K_q <= -log_q n``."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if int(cap) != cap or cap < 1:
        raise ValueError(f"cap must be a positive integer, got {cap}")
    _check_delta(delta)
    # tolerance guards exact powers such as n = 16, q = 0.5
    kmax = min(int(math.floor(math.log(cache.n) / -math.log(q) + 1e-9)), int(cap))
    ks = np.arange(0, kmax + 1)
    lams = q ** ks.astype(float)
    if mode == "paper":
        last = _largest_valid(cache, lams, delta, _kappa(cache, kappa))
        ks, lams = ks[: max(last + 1, 1)], lams[: max(last + 1, 1)]
    elif mode != "practical":
        raise ValueError(f"unknown mode {mode!r}")
    return LambdaGrid("geometric", float(q), lams, ks, mode)


def estimate_noise(cache: SpectralCache, y: ArrayLike) -> NoiseModel:
    """Residual-based noise level from a pilot fit at ``lambda = 1/sqrt(n)``.

    ``sigma^2 = ||y - K alpha||^2 / (n - N_D(lambda))``; returns ``M = gamma = sigma``.
    """
    n = cache.n
    if n < 3:
        raise ValueError("noise estimation needs at least 3 samples")
    lam = 1.0 / math.sqrt(n)
    z = cache.rotate(y)
    # Q is square orthonormal, so the residual y - K alpha has eigen-coordinates (lam n / (sigma + lam n)) z
    shrink = (lam * n) / (cache.eigenvalues + lam * n)
    rss = float(np.sum((shrink * z) ** 2))
    dof = max(n - effective_dimension(cache, lam), 1.0)
    sigma = math.sqrt(rss / dof)
    if not sigma > NOISE_FLOOR:
        warnings.warn("estimated noise level is zero; using the floor value", RuntimeWarning, stacklevel=2)
        return NoiseModel(NOISE_FLOOR, NOISE_FLOOR, "estimated", floored=True)
    return NoiseModel(sigma, sigma, "estimated")


def _log_factor(delta: float, power: int) -> float:
    return math.log(8.0 / delta) ** power


def asus_select(
    cache: SpectralCache,
    y: ArrayLike,
    grid: LambdaGrid,
    noise: NoiseModel,
    delta: float = 0.05,
    c_scale: float = 1.0,
    kappa: Optional[float] = None,
    threshold_lambda_factor: bool = True,
) -> SelectionResult:
    """Adaptive selection with uniform subdivision.

    Visits ``k = K*, K*-1, ..., 2`` and returns the first ``k`` with

        ||(L_{K,D} + lambda_{k-1})^{1/2} (f_{lambda_k} - f_{lambda_{k-1}})||_K >= tau_k,
        tau_k = c_scale 32 sqrt(2) b (kappa M + gamma) lambda_{k-1} W_{D,lambda_k} log^2(8/delta).

    If no ``k`` triggers, ``K*`` is returned with ``fallback_used=True``.
    ``threshold_lambda_factor=False`` drops the ``lambda_{k-1}`` factor.
    """
    if grid.kind != "uniform":
        raise ValueError("asus_select needs a uniform grid")
    if not c_scale > 0:
        raise ValueError(f"c_scale must be positive, got {c_scale}")
    _check_delta(delta)
    kap = _kappa(cache, kappa)
    z = cache.rotate(y)
    lams = grid.values
    last = len(lams) - 1
    c_us = c_scale * 32.0 * math.sqrt(2.0) * grid.param * (kap * noise.M + noise.gamma)
    log2 = _log_factor(delta, 2)

    steps = []
    chosen, fallback = last, True
    c_cur = cache.coords_from_rotated(z, lams[last])
    for pos in range(last, 0, -1):
        lam_k, lam_prev = lams[pos], lams[pos - 1]
        c_prev = cache.coords_from_rotated(z, lam_prev)
        d = cache.weighted_norm_coords(c_cur - c_prev, lam_prev)
        w = w_quantity(cache, lam_k)
        tau = c_us * (lam_prev if threshold_lambda_factor else 1.0) * w * log2
        steps.append(SelectionStep(int(grid.indices[pos]), float(lam_k), d, tau, effective_dimension(cache, lam_k), w))
        if d >= tau:
            chosen, fallback = pos, False
            break
        c_cur = c_prev
    c_hat = cache.coords_from_rotated(z, lams[chosen])

    return SelectionResult(
        rule="asus",
        chosen_index=int(grid.indices[chosen]),
        chosen_lambda=float(lams[chosen]),
        alpha_hat=cache.eigenvectors @ c_hat,
        steps=steps,
        comparison_count=len(steps),
        fallback_used=fallback,
        grid=grid,
    )


def lp_select(
    cache: SpectralCache,
    y: ArrayLike,
    grid: LambdaGrid,
    noise: NoiseModel,
    delta: float = 0.05,
    c_lp: float = 1.0,
    kappa: Optional[float] = None,
) -> SelectionResult:
    """Pairwise Lepskii rule on a geometric grid.

    Returns the largest ``lambda_k`` with

        ||(L_{K,D} + lambda_k)^{1/2} (f_{lambda_k'} - f_{lambda_k})||_K
            <= c_lp (kappa M + gamma) W_{D,lambda_k} log^3(8/delta)

    for every ``k' > k``.  The inner scan over ``k'`` stops at the first
    violation; ``comparison_count`` counts pairwise tests actually made.
    The last grid value has no partner to test against; reaching it on a
    grid with more than one value counts as ``fallback_used``.
    """
    if grid.kind != "geometric":
        raise ValueError("lp_select needs a geometric grid")
    if not c_lp > 0:
        raise ValueError(f"c_lp must be positive, got {c_lp}")
    _check_delta(delta)
    kap = _kappa(cache, kappa)
    z = cache.rotate(y)
    lams = grid.values
    coords = z[None, :] / cache.shifted(lams)
    scale = c_lp * (kap * noise.M + noise.gamma) * _log_factor(delta, 3)

    steps = []
    count = 0
    chosen, fallback = len(lams) - 1, True
    for pos in range(len(lams)):
        w = w_quantity(cache, lams[pos])
        tau = scale * w
        worst = 0.0
        accepted = True
        for other in range(pos + 1, len(lams)):
            count += 1
            d = cache.weighted_norm_coords(coords[other] - coords[pos], lams[pos])
            worst = max(worst, d)
            if d > tau:
                accepted = False
                break
        steps.append(SelectionStep(int(grid.indices[pos]), float(lams[pos]), worst, tau, effective_dimension(cache, lams[pos]), w))
        if accepted:
            # the smallest lambda has no partner and is accepted vacuously
            chosen, fallback = pos, pos == len(lams) - 1 and len(lams) > 1
            break

    return SelectionResult(
        rule="lp",
        chosen_index=int(grid.indices[chosen]),
        chosen_lambda=float(lams[chosen]),
        alpha_hat=cache.eigenvectors @ coords[chosen],
        steps=steps,
        comparison_count=count,
        fallback_used=fallback,
        grid=grid,
    )


def holdout_select(
    dataset: Dataset,
    spec: KernelSpec,
    grid: LambdaGrid,
    split_fraction: float = 0.2,
    seed: int = 0,
    full_cache: Optional[SpectralCache] = None,
) -> SelectionResult:
    """Hold-out baseline: train on a seeded split, pick the lambda with least validation MSE.

    Ties go to the larger lambda.  The chosen lambda is refit on the full data
    (using ``full_cache`` when supplied).
    """
    if not 0.0 < split_fraction < 1.0:
        raise ValueError(f"split_fraction must lie in (0, 1), got {split_fraction}")
    n = dataset.n
    n_val = int(math.floor(n * split_fraction))
    if n < 2 or n_val < 1 or n - n_val < 1:
        raise ValueError(f"hold-out needs at least one training and one validation point (n={n})")
    perm = np.random.default_rng(seed).permutation(n)
    val, train = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    xs, ys = dataset.xs, dataset.ys

    train_cache = build_cache(gram_matrix(spec, xs[train]), ys[train], kernel=spec)
    cross = cross_gram(spec, xs[val], xs[train])
    # predictions for all lambdas at once: cross @ Q diag(1/(sigma + lam n_t)) Q^T y_t
    proj = cross @ train_cache.eigenvectors
    coords = train_cache.rotated_y[None, :] / train_cache.shifted(grid.values)
    preds = coords @ proj.T
    mse = np.mean((preds - ys[val][None, :]) ** 2, axis=1)
    # first minimiser in decreasing-lambda order is the largest lambda among ties
    best = int(np.argmin(mse))

    cache = full_cache if full_cache is not None else build_cache(gram_matrix(spec, xs), ys, kernel=spec)
    lam = float(grid.values[best])
    steps = [
        SelectionStep(int(k), float(l), float(m), float("nan"), float("nan"), float("nan"))
        for k, l, m in zip(grid.indices, grid.values, mse)
    ]
    return SelectionResult(
        rule="holdout",
        chosen_index=int(grid.indices[best]),
        chosen_lambda=lam,
        alpha_hat=cache.eigenvectors @ cache.coords(ys, lam),
        steps=steps,
        comparison_count=len(grid),
        fallback_used=False,
        grid=grid,
    )

