"""Kernel families, Gram-matrix assembly and the sup-norm constant kappa.

Two kernels are provided:

* :class:`GaussianKernel` -- ``exp(-|x - x'|^2 / (2 h^2))`` on ``R^d``.
* :class:`TrigMercerKernel` -- the truncated trigonometric Mercer kernel on
  ``[0, 1]``::

      K(x, x') = 1 + sum_{m=1}^{J} 2 m^{-a} cos(2 pi m (x - x'))

  whose eigensystem under the uniform distribution is known in closed form:
  eigenvalue 1 for the constant function and ``m^{-a}`` (twice) for the pair
  ``sqrt(2) cos(2 pi m x), sqrt(2) sin(2 pi m x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "GaussianKernel",
    "TrigMercerKernel",
    "KernelSpec",
    "Dataset",
    "parse_kernel",
    "format_kernel",
    "eval_kernel",
    "gram_matrix",
    "cross_gram",
    "sup_norm_kappa",
    "trig_eigenvalues",
    "trig_features",
]


@dataclass(frozen=True)
class GaussianKernel:
    """Gaussian (RBF) kernel with bandwidth ``h``."""

    bandwidth: float

    def __post_init__(self):
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True)
class TrigMercerKernel:
    """Truncated trigonometric Mercer kernel on [0, 1].

    Parameters
    ----------
    decay_a : float
        Eigenvalue decay exponent ``a > 1``; eigenvalues are ``m^{-a}``.
        The capacity exponent is ``s = 1/a``.
    num_pairs : int
        Number ``J`` of retained cosine/sine pairs.
    """

    decay_a: float
    num_pairs: int = 2000

    def __post_init__(self):
        if not self.decay_a > 1:
            raise ValueError(f"decay_a must be > 1, got {self.decay_a}")
        if int(self.num_pairs) != self.num_pairs or self.num_pairs < 1:
            raise ValueError(f"num_pairs must be a positive integer, got {self.num_pairs}")

    @property
    def capacity_s(self) -> float:
        return 1.0 / self.decay_a

    @property
    def num_modes(self) -> int:
        return 2 * self.num_pairs + 1


KernelSpec = Union[GaussianKernel, TrigMercerKernel]


@dataclass(frozen=True)
class Dataset:
    """Covariates ``xs`` (shape ``(n,)`` or ``(n, d)``) and responses ``ys``."""

    xs: NDArray[np.float64]
    ys: NDArray[np.float64]

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if xs.ndim not in (1, 2):
            raise ValueError("xs must be one- or two-dimensional")
        if len(xs) < 1 or len(xs) != len(ys):
            raise ValueError(f"need len(xs) == len(ys) >= 1, got {len(xs)} and {len(ys)}")
        if not np.all(np.isfinite(xs)):
            raise ValueError("covariates must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return len(self.ys)


def parse_kernel(text: str) -> KernelSpec:
    """Parse ``"gaussian:<bandwidth>"`` or ``"trig:<a>:<J>"`` (``J`` optional)."""
    parts = text.strip().split(":")
    name = parts[0].lower()
    try:
        if name == "gaussian" and len(parts) == 2:
            return GaussianKernel(float(parts[1]))
        if name == "trig" and len(parts) in (2, 3):
            num_pairs = int(parts[2]) if len(parts) == 3 else 2000
            return TrigMercerKernel(float(parts[1]), num_pairs)
    except ValueError as exc:
        raise ValueError(f"invalid kernel spec {text!r}: {exc}") from None
    raise ValueError(f"invalid kernel spec {text!r}; expected 'gaussian:<h>' or 'trig:<a>:<J>'")


def format_kernel(spec: KernelSpec) -> str:
    if isinstance(spec, GaussianKernel):
        return f"gaussian:{spec.bandwidth!r}"
    return f"trig:{spec.decay_a!r}:{spec.num_pairs}"


def _check_unit_interval(x: NDArray) -> None:
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("trig_mercer covariates must lie in [0, 1]")


def _as_points(xs: ArrayLike) -> NDArray[np.float64]:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 0:
        xs = xs.reshape(1, 1)
    elif xs.ndim == 1:
        xs = xs[:, None]
    if not np.all(np.isfinite(xs)):
        raise ValueError("covariates must be finite")
    return xs


def _as_line(xs: ArrayLike) -> NDArray[np.float64]:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 2:
        if xs.shape[1] != 1:
            raise ValueError("trig_mercer kernel is one-dimensional")
        xs = xs[:, 0]
    xs = np.atleast_1d(xs)
    if not np.all(np.isfinite(xs)):
        raise ValueError("covariates must be finite")
    _check_unit_interval(xs)
    return xs


def trig_eigenvalues(spec: TrigMercerKernel) -> NDArray[np.float64]:
    """Mercer eigenvalues ``[1, 1, 1, 2^-a, 2^-a, ...]`` of length ``2J + 1``."""
    m = np.arange(1, spec.num_pairs + 1, dtype=float)
    mu = np.empty(spec.num_modes)
    mu[0] = 1.0
    mu[1::2] = m ** (-spec.decay_a)
    mu[2::2] = mu[1::2]
    return mu


def trig_features(spec: TrigMercerKernel, xs: ArrayLike) -> NDArray[np.float64]:
    """Orthonormal feature map ``[1, sqrt2 cos(2 pi m x), sqrt2 sin(2 pi m x), ...]``.

    Returns an array of shape ``(n, 2J + 1)``; columns are ordered like
    :func:`trig_eigenvalues`.
    """
    x = _as_line(xs)
    phase = 2.0 * np.pi * np.outer(x, np.arange(1, spec.num_pairs + 1))
    phi = np.empty((len(x), spec.num_modes))
    phi[:, 0] = 1.0
    phi[:, 1::2] = math.sqrt(2.0) * np.cos(phase)
    phi[:, 2::2] = math.sqrt(2.0) * np.sin(phase)
    return phi


def eval_kernel(spec: KernelSpec, x: ArrayLike, x2: ArrayLike) -> float:
    """Evaluate ``K(x, x2)`` pointwise."""
    if isinstance(spec, GaussianKernel):
        u = _as_points(x).reshape(-1)
        v = _as_points(x2).reshape(-1)
        if u.shape != v.shape:
            raise ValueError("covariates have different dimensions")
        return float(np.exp(-np.sum((u - v) ** 2) / (2.0 * spec.bandwidth**2)))
    u = _as_line(x)
    v = _as_line(x2)
    if u.size != 1 or v.size != 1:
        raise ValueError("eval_kernel expects single covariates")
    # cos is even, so the sign of the difference does not matter
    diff = abs(float(u[0]) - float(v[0]))
    m = np.arange(1, spec.num_pairs + 1, dtype=float)
    return float(1.0 + np.sum(2.0 * m ** (-spec.decay_a) * np.cos(2.0 * np.pi * m * diff)))


def _mirror_lower(g: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.tril(g) + np.tril(g, -1).T


def gram_matrix(spec: KernelSpec, xs: ArrayLike) -> NDArray[np.float64]:
    """Kernel matrix ``(K(x_i, x_j))_{ij}``, exactly symmetric.

    The lower triangle is computed and mirrored, so ``G == G.T`` bit for bit.
    """
    if isinstance(spec, GaussianKernel):
        pts = _as_points(xs)
        if len(pts) == 0:
            raise ValueError("xs must be non-empty")
        sq = np.sum(pts**2, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
        np.maximum(d2, 0.0, out=d2)
        g = np.exp(-d2 / (2.0 * spec.bandwidth**2))
        np.fill_diagonal(g, 1.0)
        return _mirror_lower(g)
    phi = trig_features(spec, xs)
    if len(phi) == 0:
        raise ValueError("xs must be non-empty")
    phi *= np.sqrt(trig_eigenvalues(spec))
    return _mirror_lower(phi @ phi.T)


def cross_gram(spec: KernelSpec, xa: ArrayLike, xb: ArrayLike) -> NDArray[np.float64]:
    """Rectangular kernel matrix ``(K(a_i, b_j))_{ij}``."""
    if isinstance(spec, GaussianKernel):
        a, b = _as_points(xa), _as_points(xb)
        if a.shape[1] != b.shape[1]:
            raise ValueError("covariates have different dimensions")
        d2 = np.sum(a**2, 1)[:, None] + np.sum(b**2, 1)[None, :] - 2.0 * (a @ b.T)
        return np.exp(-np.maximum(d2, 0.0) / (2.0 * spec.bandwidth**2))
    return (trig_features(spec, xa) * trig_eigenvalues(spec)) @ trig_features(spec, xb).T


def sup_norm_kappa(spec: KernelSpec) -> float:
    """``kappa = sup_x sqrt(K(x, x))``."""
    if isinstance(spec, GaussianKernel):
        return 1.0
    m = np.arange(1, spec.num_pairs + 1, dtype=float)
    return math.sqrt(1.0 + 2.0 * float(np.sum(m ** (-spec.decay_a))))
