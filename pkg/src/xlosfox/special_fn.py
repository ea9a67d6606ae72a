"""Complex log-gamma and log-space products of gamma functions.

Every Mellin-Barnes integrand in this package is a ratio of gamma products
times a power of the argument, so everything here works on numpy arrays of
complex numbers and accumulates in log space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["PoleError", "GammaTerm", "log_gamma", "log_gamma_product", "POLE_TOL"]

POLE_TOL = 1e-12

# Lanczos approximation (g ~ 6.0247, 13 terms) in the scaled rational form
# used by Boost and cephes; coefficients listed from the highest power down.
_LANCZOS_G = 6.024680040776729583740234375
_LANCZOS_NUM = (
    0.006061842346248906525783753964555936883222,
    0.5098416655656676188125178644804694509993,
    19.51992788247617482847860966235652136208,
    449.9445569063168119446858607650988409623,
    6955.999602515376140356310115515198987526,
    75999.29304014542649875303443598909137092,
    601859.6171681098786670226533699352302507,
    3481712.15498064590882071018964774556468,
    14605578.08768506808414169982791359218571,
    43338889.32467613834773723740590533316085,
    86363131.28813859145546927288977868422342,
    103794043.1163445451906271053616070238554,
    56906521.91347156388090791033559122686859,
)
_LANCZOS_DEN = (
    1.0, 66.0, 1925.0, 32670.0, 357423.0, 2637558.0, 13339535.0,
    45995730.0, 105258076.0, 150917976.0, 120543840.0, 39916800.0, 0.0,
)
_LOG_PI = np.log(np.pi)
_TWO_PI = 2.0 * np.pi


class PoleError(ArithmeticError):
    """A gamma factor was evaluated at (or within POLE_TOL of) a pole."""

    def __init__(self, where):
        self.where = where
        super().__init__(f"gamma function pole at {where}")


@dataclass(frozen=True)
class GammaTerm:
    """One factor Gamma(offset + coeffs . s), in the numerator (sign=+1)
    or the denominator (sign=-1)."""

    offset: float
    coeffs: tuple[float, ...]
    sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "offset", float(self.offset))
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")


def _lanczos_right(z):
    # valid for Re(z) >= 0.5
    num = np.full(z.shape, _LANCZOS_NUM[0], dtype=complex)
    den = np.full(z.shape, _LANCZOS_DEN[0], dtype=complex)
    for cn, cd in zip(_LANCZOS_NUM[1:], _LANCZOS_DEN[1:]):
        num = num * z + cn
        den = den * z + cd
    # the scaled sum already carries the exp(-g) factor
    zh = z - 0.5
    return zh * (np.log(zh + _LANCZOS_G) - 1.0) + np.log(num / den)


def _log_sin_pi(z):
    """log(sin(pi z)) without overflow for large |Im z|."""
    # sin(pi z) = e^{-i pi z} (e^{2 i pi z} - 1) / (2i) for Im z >= 0;
    # the conjugate relation covers Im z < 0.
    flip = z.imag < 0
    w = np.where(flip, np.conj(z), z)
    val = -1j * np.pi * w + np.log(np.expm1(2j * np.pi * w)) - np.log(2j)
    return np.where(flip, np.conj(val), val)


def _wrap(lg):
    im = lg.imag
    return lg.real + 1j * (im - _TWO_PI * np.round(im / _TWO_PI))


def _check_poles(z):
    nearest = np.round(z.real)
    bad = (nearest <= 0) & (np.abs(z - nearest) < POLE_TOL)
    if np.any(bad):
        raise PoleError(complex(z[bad][0]))


def log_gamma(z):
    """Principal value of log(Gamma(z)) for complex z.

    The imaginary part is reduced to (-pi, pi], so ``exp(log_gamma(z))``
    is Gamma(z) itself. Arrays are evaluated elementwise; a scalar in
    gives a scalar out.

    Raises
    ------
    PoleError
        If any element lies within ``POLE_TOL`` of a nonpositive integer.
    """
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=complex)
    _check_poles(z)
    out = _wrap(_unwrapped_log_gamma(z))
    return complex(out) if scalar else out


def _unwrapped_log_gamma(z):
    left = z.real < 0.5
    if not np.any(left):
        return _lanczos_right(z)
    out = np.empty(z.shape, dtype=complex)
    right = ~left
    out[right] = _lanczos_right(z[right])
    zl = z[left]
    # reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
    out[left] = _LOG_PI - _log_sin_pi(zl) - _lanczos_right(1.0 - zl)
    return out


def log_gamma_product(terms: Sequence[GammaTerm], s):
    """Sum of sign * log Gamma(offset + coeffs . s) over ``terms``.

    ``s`` has the ambient dimension M as its last axis; leading axes are
    broadcast, so a (n, M) array of points gives n values. The imaginary
    part of the total is reduced to (-pi, pi].
    """
    s = np.asarray(s, dtype=complex)
    if s.ndim == 0:
        raise ValueError("s must have the dimension as its last axis")
    dim = s.shape[-1]
    total = np.zeros(s.shape[:-1], dtype=complex)
    for term in terms:
        if len(term.coeffs) != dim:
            raise ValueError(
                f"term has {len(term.coeffs)} coefficients, s has dimension {dim}")
        # explicit accumulation (not BLAS) keeps results independent of
        # how many points are evaluated together
        arg = np.full(s.shape[:-1], term.offset, dtype=complex)
        for m, c in enumerate(term.coeffs):
            if c != 0.0:
                arg = arg + c * s[..., m]
        _check_poles(arg)
        lg = _unwrapped_log_gamma(arg.reshape(-1)).reshape(arg.shape)
        if term.sign > 0:
            total = total + lg
        else:
            total = total - lg
    total = _wrap(total)
    return total if total.ndim else complex(total)
