"""Halton point sets, random shifts and box mapping for QMC integration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PointSet",
    "DegenerateBoxError",
    "halton_points",
    "halton_block",
    "randomize",
    "random_shift",
    "apply_shift",
    "map_to_box",
    "default_point_budget",
    "first_primes",
    "MAX_DIM",
]

MAX_DIM = 64
DEFAULT_SKIP = 1000
DEFAULT_LEAP = 100


class DegenerateBoxError(ValueError):
    pass


def first_primes(n):
    primes = []
    k = 2
    while len(primes) < n:
        if all(k % p for p in primes if p * p <= k):
            primes.append(k)
        k += 1
    return primes


_PRIMES = first_primes(MAX_DIM)


@dataclass(frozen=True)
class PointSet:
    """``count`` points of the unit cube in ``dim`` dimensions, one per row."""

    points: np.ndarray

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def count(self):
        return self.points.shape[0]


def default_point_budget(dim):
    """2^8 * 3^3 * 5^(2+dim) points, the budget used for the reference values."""
    return 2**8 * 3**3 * 5 ** (2 + dim)


def _radical_inverse(indices, base):
    out = np.zeros(indices.shape, dtype=float)
    n = indices.copy()
    scale = 1.0 / base
    while np.any(n):
        n, digit = np.divmod(n, base)
        out += digit * scale
        scale /= base
    return out


def halton_block(dim, start, count, skip=DEFAULT_SKIP, leap=DEFAULT_LEAP):
    """Rows ``start .. start+count-1`` of the leaped Halton sequence.

    Row k is the radical inverse of ``skip + 1 + k * (leap + 1)`` in each of
    the first ``dim`` prime bases; index 0 (the origin) is never produced.
    Leaps that share a factor with a base degrade that coordinate, which
    only happens for dim above 26 at the default leap of 100.
    """
    if dim < 1 or count < 1:
        raise ValueError("dim and count must be positive")
    if dim > MAX_DIM:
        raise ValueError(f"unsupported dimension {dim} (max {MAX_DIM})")
    if skip < 0 or leap < 0 or start < 0:
        raise ValueError("skip, leap and start must be nonnegative")
    k = np.arange(start, start + count, dtype=np.int64)
    idx = skip + 1 + k * (leap + 1)
    return np.stack([_radical_inverse(idx, b) for b in _PRIMES[:dim]], axis=1)


def halton_points(dim, count, skip=DEFAULT_SKIP, leap=DEFAULT_LEAP):
    return PointSet(halton_block(dim, 0, count, skip, leap))


def random_shift(dim, seed):
    """Cranley-Patterson shift vector for ``seed``."""
    return np.random.default_rng(seed).random(dim)


def apply_shift(u, shift):
    v = np.mod(u + shift, 1.0)
    # keep coordinates strictly inside (0, 1)
    return np.where(v <= 0.0, np.nextafter(0.0, 1.0), v)


def randomize(points, seed, shift=None):
    """Shift every point by a seed-determined vector, modulo 1.

    ``shift`` overrides the drawn vector (used to check the zero-shift
    identity).
    """
    if shift is None:
        shift = random_shift(points.dim, seed)
    shift = np.asarray(shift, dtype=float)
    if np.all(shift == 0):
        return PointSet(points.points.copy())
    return PointSet(apply_shift(points.points, shift))


def map_to_box(points, lower, upper):
    """Affine map of unit-cube points onto the box with corners lower, upper.

    Returns the mapped complex points and the (complex) box volume
    prod(upper - lower).
    """
    u = points.points if isinstance(points, PointSet) else np.asarray(points)
    lower = np.asarray(lower, dtype=complex)
    upper = np.asarray(upper, dtype=complex)
    if lower.shape != (u.shape[1],) or upper.shape != lower.shape:
        raise ValueError("box corners must match the point dimension")
    extent = upper - lower
    if np.any(extent == 0):
        raise DegenerateBoxError(
            f"zero-length side in dimension {int(np.flatnonzero(extent == 0)[0])}")
    return lower + extent * u, complex(np.prod(extent))
