"""Shared eigendecomposition of the Gram matrix and per-lambda KRR primitives.

With ``K = Q diag(sigma) Q^T`` every regularization level costs O(n^2) for
the coefficients and O(n) for quantities expressed in eigen-coordinates
``c = Q^T alpha``:

* ``||f||_D^2   = sum sigma^2 c^2 / n``
* ``||f||_K^2   = sum sigma c^2``
* ``N_D(lambda) = sum sigma / (sigma + lambda n)``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "SpectralCache",
    "KrrModel",
    "build_cache",
    "krr_solve",
    "effective_dimension",
    "empirical_norm",
    "rkhs_norm_diff",
    "weighted_norm",
    "resolvent_difference_check",
]


@dataclass(frozen=True, eq=False)
class SpectralCache:
    """Gram matrix with its descending, clamped eigendecomposition.

    Attributes
    ----------
    gram : ndarray, shape (n, n)
    eigenvalues : ndarray, shape (n,)
        ``sigma_1 >= ... >= sigma_n >= 0``.
    eigenvectors : ndarray, shape (n, n)
        Orthonormal columns matching ``eigenvalues``.
    rotated_y : ndarray or None
        ``Q^T y`` for the responses the cache was built with.
    kernel : optional
        Kernel that produced ``gram``; carried along for provenance checks.
    """

    gram: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]
    rotated_y: Optional[NDArray[np.float64]] = None
    kernel: object = None
    y: Optional[NDArray[np.float64]] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def kappa_lower(self) -> float:
        """``sqrt(max_i K(x_i, x_i))``, the data-visible part of kappa."""
        return float(np.sqrt(np.max(np.diag(self.gram))))

    def rotate(self, y: ArrayLike) -> NDArray[np.float64]:
        """Return ``Q^T y``, reusing the cached rotation when ``y`` is the build vector."""
        y = _check_vector(y, self.n, "y")
        if self.rotated_y is not None and self.y is not None and np.array_equal(y, self.y):
            return self.rotated_y
        return self.eigenvectors.T @ y

    def shifted(self, lam) -> NDArray[np.float64]:
        """``sigma + lambda n``; broadcast against an array of lambdas if given."""
        lam = np.asarray(lam, dtype=float)
        return self.eigenvalues + lam[..., None] * self.n

    def coords(self, y: ArrayLike, lam: float) -> NDArray[np.float64]:
        """Eigen-coordinates ``Q^T alpha`` of the KRR solution at ``lam``."""
        _check_lambda(lam)
        return self.rotate(y) / (self.eigenvalues + lam * self.n)

    def coords_from_rotated(self, z: NDArray[np.float64], lam: float) -> NDArray[np.float64]:
        return z / (self.eigenvalues + lam * self.n)

    def weighted_norm_coords(self, dc: NDArray[np.float64], lam: float) -> float:
        """``sqrt(||g||_D^2 + lam ||g||_K^2)`` for ``g`` with eigen-coordinates ``dc``."""
        s = self.eigenvalues
        return float(np.sqrt(np.sum((s * s / self.n + lam * s) * dc * dc)))

    def rkhs_norm_coords(self, c: NDArray[np.float64]) -> float:
        return float(np.sqrt(np.sum(self.eigenvalues * c * c)))

    def empirical_norm_coords(self, c: NDArray[np.float64]) -> float:
        return float(np.sqrt(np.sum((self.eigenvalues * c) ** 2) / self.n))


@dataclass(frozen=True, eq=False)
class KrrModel:
    """KRR estimator ``f = sum_i alpha_i K(x_i, .)`` at one regularization level."""

    lam: float
    alpha: NDArray[np.float64]
    fitted_values: NDArray[np.float64]
    kernel: object = None


def _check_lambda(lam) -> None:
    lam_arr = np.asarray(lam, dtype=float)
    if not np.all(lam_arr > 0) or not np.all(np.isfinite(lam_arr)):
        raise ValueError(f"lambda must be positive and finite, got {lam}")


def _check_vector(v: ArrayLike, n: int, name: str) -> NDArray[np.float64]:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (n,):
        raise ValueError(f"{name} has length {v.size}, expected {n}")
    return v


def build_cache(gram: ArrayLike, y: Optional[ArrayLike] = None, kernel=None) -> SpectralCache:
    """Eigendecompose ``gram`` once; negative roundoff eigenvalues are clamped to 0."""
    g = np.asarray(gram, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] == 0:
        raise ValueError(f"gram must be a non-empty square matrix, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("gram contains non-finite entries")
    if not np.allclose(g, g.T, rtol=0, atol=1e-12 * max(1.0, float(np.max(np.abs(g))))):
        raise ValueError("gram must be symmetric")
    try:
        w, v = scipy.linalg.eigh(g, driver="evd")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise np.linalg.LinAlgError(f"eigendecomposition failed: {exc}") from exc
    w = np.maximum(w[::-1], 0.0)
    v = np.ascontiguousarray(v[:, ::-1])
    y_vec = rotated = None
    if y is not None:
        y_vec = _check_vector(y, g.shape[0], "y")
        rotated = v.T @ y_vec
    return SpectralCache(gram=g, eigenvalues=w, eigenvectors=v, rotated_y=rotated, kernel=kernel, y=y_vec)


def krr_solve(cache: SpectralCache, y: ArrayLike, lam: float) -> KrrModel:
    """Solve ``(K + lam n I) alpha = y`` through the cached eigenbasis."""
    c = cache.coords(y, lam)
    alpha = cache.eigenvectors @ c
    fitted = cache.eigenvectors @ (cache.eigenvalues * c)
    return KrrModel(lam=float(lam), alpha=alpha, fitted_values=fitted, kernel=cache.kernel)


def effective_dimension(cache: SpectralCache, lam):
    """Empirical effective dimension ``Tr[(lam n I + K)^{-1} K]``.

    ``lam`` may be a scalar or an array; the result has the same shape.
    """
    _check_lambda(lam)
    s = cache.eigenvalues
    out = np.sum(s / cache.shifted(lam), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def empirical_norm(cache: SpectralCache, delta_alpha: ArrayLike) -> float:
    """``||g||_D`` for ``g = sum_i delta_alpha_i K(x_i, .)``."""
    d = _check_vector(delta_alpha, cache.n, "delta_alpha")
    values = cache.gram @ d
    return float(np.sqrt(values @ values / cache.n))


def rkhs_norm_diff(cache: SpectralCache, alpha_a: ArrayLike, alpha_b: ArrayLike) -> float:
    """``||f_a - f_b||_K = sqrt(D^T K D)`` with ``D = alpha_a - alpha_b``."""
    d = _check_vector(alpha_a, cache.n, "alpha_a") - _check_vector(alpha_b, cache.n, "alpha_b")
    return float(np.sqrt(max(float(d @ (cache.gram @ d)), 0.0)))


def weighted_norm(cache: SpectralCache, delta_alpha: ArrayLike, lam: float) -> float:
    """``||(L_{K,D} + lam I)^{1/2} g||_K = sqrt(||g||_D^2 + lam ||g||_K^2)``."""
    _check_lambda(lam)
    d = _check_vector(delta_alpha, cache.n, "delta_alpha")
    values = cache.gram @ d
    sq = values @ values / cache.n + lam * max(float(d @ values), 0.0)
    return float(np.sqrt(sq))


def resolvent_difference_check(cache: SpectralCache, y: ArrayLike, lam: float, lam2: float) -> float:
    """Relative gap between ``alpha(lam) - alpha(lam2)`` and its resolvent-identity form.

    The right-hand side ``(lam2 - lam) n (K + lam n I)^{-1} (K + lam2 n I)^{-1} y``
    is evaluated with dense Cholesky solves, independently of the eigenbasis
    used for the left-hand side.
    """
    _check_lambda([lam, lam2])
    y = _check_vector(y, cache.n, "y")
    lhs = krr_solve(cache, y, lam).alpha - krr_solve(cache, y, lam2).alpha
    n = cache.n
    eye = np.eye(n)
    inner = scipy.linalg.solve(cache.gram + lam2 * n * eye, y, assume_a="pos")
    rhs = (lam2 - lam) * n * scipy.linalg.solve(cache.gram + lam * n * eye, inner, assume_a="pos")
    scale = max(float(np.linalg.norm(lhs)), float(np.linalg.norm(rhs)))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(lhs - rhs) / scale)
