"""Gaussian-weight cubature and products of lognormal CDFs.

A product of M lognormal CDFs is written as a Gaussian-weight integral of a
product of unit steps, then discretized with a monomial cubature:

    prod_m F_m(t_m) ~= pi^{-M/2} sum_l w_l prod_m 1{t_m > omega_{l,m}},
    omega_{l,m} = 10^{(sqrt(2) sigma_m u_{l,m} + mu_m) / 10}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import ndtr

__all__ = [
    "Cubature",
    "LognormalSpec",
    "product_gauss_hermite",
    "lognormal_nodes",
    "product_lognormal_cdf",
    "lognormal_cdf_direct",
    "MAX_ORDER",
    "MAX_DIM",
]

MAX_ORDER = 64
MAX_DIM = 6


@dataclass(frozen=True)
class Cubature:
    """Weights ``w`` (L,) and abscissas ``u`` (L, M) for the weight exp(-|u|^2)."""

    weights: np.ndarray
    abscissas: np.ndarray
    degree: int = 1

    @property
    def dim(self):
        return self.abscissas.shape[1]

    @property
    def count(self):
        return self.weights.shape[0]


@dataclass(frozen=True)
class LognormalSpec:
    mu_dB: float = 0.0
    sigma_dB: float = 0.0

    def __post_init__(self):
        if not self.sigma_dB >= 0:
            raise ValueError(f"sigma_dB must be nonnegative, got {self.sigma_dB}")


def product_gauss_hermite(M: int, n: int) -> Cubature:
    """Tensor product of n-point Gauss-Hermite rules; exact through degree 2n-1 per axis.

    Nodes are ordered like ``itertools.product`` over the 1-D nodes, the
    last axis varying fastest.
    """
    if not (1 <= M <= MAX_DIM):
        raise ValueError(f"unsupported dimension {M} (1..{MAX_DIM})")
    if not (1 <= n <= MAX_ORDER):
        raise ValueError(f"unsupported order {n} (1..{MAX_ORDER})")
    x, w = hermgauss(n)
    u = np.array(list(itertools.product(x, repeat=M)), dtype=float).reshape(-1, M)
    wl = np.prod(np.array(list(itertools.product(w, repeat=M))).reshape(-1, M), axis=1)
    return Cubature(wl, u, 2 * n - 1)


def _specs(specs, M):
    specs = list(specs)
    if len(specs) != M:
        raise ValueError(f"expected {M} lognormal specs, got {len(specs)}")
    mu = np.array([s.mu_dB for s in specs], dtype=float)
    sigma = np.array([s.sigma_dB for s in specs], dtype=float)
    return mu, sigma


def lognormal_nodes(cub: Cubature, specs: Sequence[LognormalSpec]):
    """omega_{l,m} = 10^{(sqrt(2) sigma_m u_{l,m} + mu_m) / 10}, shape (L, M)."""
    mu, sigma = _specs(specs, cub.dim)
    return 10.0 ** ((math.sqrt(2.0) * sigma * cub.abscissas + mu) / 10.0)


def product_lognormal_cdf(thresholds, specs: Sequence[LognormalSpec], cub: Cubature) -> float:
    """Cubature value of prod_m Pr[X_m < thresholds_m] for lognormal X_m."""
    th = np.asarray(thresholds, dtype=float)
    if th.shape != (cub.dim,):
        raise ValueError(f"expected {cub.dim} thresholds")
    if np.any(th <= 0):
        raise ValueError("thresholds must be positive")
    omega = lognormal_nodes(cub, specs)
    inside = np.all(th[None, :] > omega, axis=1)
    val = float(np.sum(cub.weights[inside])) / math.pi ** (cub.dim / 2.0)
    return min(1.0, max(0.0, val))


def lognormal_cdf_direct(threshold: float, spec: LognormalSpec) -> float:
    """Phi((10 log10(threshold) - mu) / sigma); a unit step when sigma is 0."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    x = 10.0 * math.log10(threshold) - spec.mu_dB
    if spec.sigma_dB == 0:
        return 1.0 if x > 0 else 0.0
    return float(ndtr(x / spec.sigma_dB))
