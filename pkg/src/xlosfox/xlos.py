"""XLOS service probability: Fox H closed form, asymptotes and a 1-D oracle.

With the M strongest cells monitored, the probability that at least one of
them has a K-factor above K_th is

    P = 1 - (2 sqrt(pi) / alpha)^M  sum_n prod_m lambda~_{n_m}
            sum_l w_l (alpha/2) (pi lambda_T)^{-M} H(z_{n,l})

where the sum runs over tier assignments n in {1..N}^M and cubature nodes l,
and H is an M-variate Fox H-function sharing one gamma structure for every
(n, l); only its argument z_{n,l} changes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .contour import plan_contour
from .cubature import LognormalSpec, lognormal_nodes, product_gauss_hermite
from .foxh import ContourSpec, EvalOptions, FoxHParams, Pair, VariableBlock, eval_batch
from .network import DerivedNetwork, Scenario, derive

__all__ = [
    "XlosQuery",
    "XlosResult",
    "QuadratureError",
    "MAX_M",
    "METHODS",
    "default_order",
    "build_foxh_params",
    "xlos_closed_form",
    "xlos_asymptotic",
    "xlos_oracle_m1",
    "sweep",
]

MAX_M = 3
METHODS = ("closed_form", "asymptotic_high", "asymptotic_low", "oracle_m1")
# relative size of the truncated tail for the univariate kernel
_M1_TAIL = 1e-8
_MULTI_HEIGHT = 10.0


class QuadratureError(ArithmeticError):
    pass


def default_order(M):
    return 16 if M <= 2 else 8


@dataclass(frozen=True)
class XlosQuery:
    """One closed-form evaluation.

    ``order=None`` picks the default cubature order for the monitoring set
    size, ``half_height=None`` the default contour height for the kernel.
    """

    scenario: Scenario
    K_th_dB: float
    order: int | None = None
    options: EvalOptions = EvalOptions()
    half_height: float | None = None

    def __post_init__(self):
        if self.order is not None and self.order < 2:
            raise ValueError("cubature order must be at least 2")

    @property
    def M(self):
        return self.scenario.monitor_set_size

    @property
    def cubature_order(self):
        return default_order(self.M) if self.order is None else self.order

    @property
    def K_th(self):
        return 10.0 ** (self.K_th_dB / 10.0)


@dataclass
class XlosResult:
    probability: float
    method: str
    K_th_dB: float
    stderr: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def _clamp(p):
    return min(1.0, max(0.0, p))


def _z_values(net: DerivedNetwork, tiers, omega_l, K_th):
    tiers = np.asarray(tiers)
    a2 = net.alpha / 2.0
    with np.errstate(divide="ignore"):
        return K_th * net.Lambda[tiers] ** a2 / (np.asarray(omega_l) * net.K[tiers])


def build_foxh_params(net: DerivedNetwork, tiers: Sequence[int], omega_l, K_th: float) -> FoxHParams:
    """Kernel and argument for tier assignment ``tiers`` (0-based) and node row ``omega_l``."""
    M = len(tiers)
    if len(omega_l) != M:
        raise ValueError("node row must have one entry per monitored cell")
    z = _z_values(net, tiers, omega_l, K_th)
    if not np.all(z > 0) or not np.all(np.isfinite(z)):
        raise ValueError(f"nonpositive or non-finite argument z = {z}")
    return _kernel(M, net.alpha).with_z(tuple(float(v) for v in z))


def _kernel(M, alpha, z=None):
    a2 = alpha / 2.0
    upper, lower_den = [], []
    for i in range(1, M):
        ind = tuple(1.0 if m <= i else 0.0 for m in range(1, M + 1))
        upper.append(Pair(1.0 - 2.0 * i / alpha, ind))
        lower_den.append(Pair(-2.0 * i / alpha, ind))
    upper.append(Pair(1.0 - M, (a2,) * M))
    block = VariableBlock(upper_num=[(1.0, 1.0)], lower_den=[(0.0, 1.0)])
    return FoxHParams(z or (1.0,) * M, tuple(upper), (), tuple(lower_den), (block,) * M)


def _terms(query: XlosQuery):
    """Coefficients c_k and arguments z_k with P = 1 - sum_k c_k H(z_k)."""
    net = derive(query.scenario)
    M = query.M
    cub = product_gauss_hermite(M, query.cubature_order)
    omega = lognormal_nodes(cub, [LognormalSpec(0.0, net.sigmaK_dB)] * M)
    pref = (2.0 * math.sqrt(math.pi) / net.alpha) ** M * (net.alpha / 2.0) \
        * (math.pi * net.lambda_T) ** (-M)
    coeffs, zs, labels = [], [], []
    for tiers in itertools.product(range(net.n_tiers), repeat=M):
        lt = float(np.prod(net.lambda_tilde[list(tiers)]))
        z = _z_values(net, tiers, omega, query.K_th)
        coeffs.append(pref * lt * cub.weights)
        zs.append(z)
        labels.extend((tiers, l) for l in range(cub.count))
    return net, np.concatenate(coeffs), np.concatenate(zs), labels


def _m1_height(alpha):
    # |Gamma(1 + alpha s / 2)| decays like exp(-pi alpha |t| / 4)
    return math.ceil(4.0 * math.log(1.0 / _M1_TAIL) / (math.pi * alpha))


def _m1_left_abscissa(alpha):
    # between the pole at 0 and the first pole of Gamma(1 + alpha s / 2) at -2/alpha
    c = -0.875 * 2.0 / alpha
    if abs(c - round(c)) < 0.05:
        c += 0.1 * min(1.0, 2.0 / alpha)
    return c


def xlos_closed_form(query: XlosQuery) -> XlosResult:
    """Closed form evaluated through the QMC Fox H engine.

    For M = 1 the complement 1 - H is computed directly when z > 1 by moving
    the contour left of the pole at 0 (residue 1), which keeps relative
    accuracy in the high-threshold tail.
    """
    M = query.M
    if M > MAX_M:
        raise ValueError(f"monitoring set size {M} exceeds the supported maximum {MAX_M}")
    net, coeffs, zs, labels = _terms(query)
    kernel = _kernel(M, net.alpha)
    opts = query.options
    diag = {"terms": len(coeffs)}
    if M == 1:
        W = query.half_height or _m1_height(net.alpha)
        z = zs[:, 0]
        right = ContourSpec(tuple(plan_contour(kernel, W).abscissa), W)
        left = ContourSpec((_m1_left_abscissa(net.alpha),), W)
        # one minus H, per replicate
        comp = np.empty((len(z), opts.replicates))
        errs = np.zeros(len(z))
        for mask, contour, sign, base in ((z <= 1, right, -1.0, 1.0), (z > 1, left, -1.0, 0.0)):
            if not np.any(mask):
                continue
            res = _eval(kernel, contour, zs[mask], opts, labels, np.flatnonzero(mask))
            comp[mask] = base + sign * np.array([np.real(r.replicates) for r in res])
            errs[mask] = [r.stderr for r in res]
        # sum_k c_k (1 - H_k) = 1 - (1 - sum c_k) - sum c_k H_k; sum c_k = 1 here
        reps = coeffs @ comp + (1.0 - coeffs.sum())
        diag.update(contour_right=right.abscissa, contour_left=left.abscissa, half_height=W)
    else:
        W = query.half_height or _MULTI_HEIGHT
        contour = plan_contour(kernel, W)
        res = _eval(kernel, contour, zs, opts, labels, np.arange(len(zs)))
        H = np.array([np.real(r.replicates) for r in res])
        errs = np.array([r.stderr for r in res])
        reps = 1.0 - coeffs @ H
        diag.update(contour=contour.abscissa, half_height=W)
    raw = float(np.mean(reps))
    stderr = float(np.std(reps, ddof=1) / math.sqrt(len(reps))) if len(reps) > 1 else 0.0
    diag.update(raw=raw, term_stderr=errs.tolist())
    return XlosResult(_clamp(raw), "closed_form", query.K_th_dB, stderr, diag)


def _eval(kernel, contour, zs, opts, labels, idx):
    try:
        return eval_batch(kernel, contour, zs, opts)
    except ArithmeticError as exc:
        point = getattr(exc, "point", None)
        raise type(exc)(f"{exc} (terms {labels[idx[0]]}..{labels[idx[-1]]}, point {point})") \
            from exc


def xlos_asymptotic(query: XlosQuery, regime: str) -> XlosResult:
    """Low-ratio limit (exactly 1) or the high-ratio power law in K_th."""
    if regime == "low":
        return XlosResult(1.0, "asymptotic_low", query.K_th_dB, 0.0, {"raw": 1.0})
    if regime != "high":
        raise ValueError(f"unknown regime {regime!r}")
    net = derive(query.scenario)
    M = query.M
    cub = product_gauss_hermite(M, query.cubature_order)
    omega = lognormal_nodes(cub, [LognormalSpec(0.0, net.sigmaK_dB)] * M)
    power = 2.0 / net.alpha
    total = 0.0
    for tiers in itertools.product(range(net.n_tiers), repeat=M):
        n1 = tiers[0]
        rho = float(np.prod(net.rho[list(tiers)]))
        inner = float(np.sum(cub.weights * (omega[:, 0] * net.K[n1] / query.K_th) ** power))
        total += net.lambda_T / net.omega[n1] * rho * inner
    raw = math.pi ** (1.0 - M / 2.0) * total
    return XlosResult(_clamp(raw), "asymptotic_high", query.K_th_dB, 0.0, {"raw": raw})


def xlos_oracle_m1(scenario: Scenario, K_th_dB: float, epsabs: float = 1e-9) -> float:
    """Direct 1-D integral of the lognormal CDF against the nearest-point law (M = 1).

    With u = pi lambda_T r^2 and t = ln u, the dB argument of the CDF is
    affine in t and the distance law becomes exp(t - e^t) dt.
    """
    net = derive(scenario)
    K_th = 10.0 ** (K_th_dB / 10.0)
    slope = 5.0 * net.alpha / math.log(10.0)
    sigma = net.sigmaK_dB
    total = 0.0
    for n in range(net.n_tiers):
        a = 10.0 * math.log10(K_th * net.Lambda[n] ** (net.alpha / 2.0) / net.K[n])
        if sigma == 0:
            # step at t0: the nearest point is close enough with prob 1 - exp(-e^{t0})
            t0 = -a / slope
            fail = math.exp(-math.exp(t0)) if t0 < 700 else 0.0
        else:
            def f(t):
                return ndtr((a + slope * t) / sigma) * math.exp(t - math.exp(t))

            t0 = -a / slope
            brk = [b for b in (t0 - 4 * sigma / slope, t0, t0 + 4 * sigma / slope, 0.0)
                   if -60.0 < b < 6.0]
            fail, err, info = _quad(f, -60.0, 6.0, sorted(set(brk)), epsabs)
        total += net.rho[n] * fail
    return 1.0 - total


def _quad(f, lo, hi, points, epsabs):
    with np.errstate(all="ignore"):
        out = integrate.quad(f, lo, hi, points=points or None, epsabs=epsabs, epsrel=1e-10,
                             limit=500, full_output=1)
    val, err = out[0], out[1]
    if len(out) > 3 or err > 1e-6:
        raise QuadratureError(f"quadrature did not converge (error estimate {err:g})")
    return val, err, out[2]


def _run(method, scenario, k, order, options, half_height):
    if method == "oracle_m1":
        if scenario.monitor_set_size != 1:
            raise ValueError("the oracle applies to a monitoring set of size 1 only")
        return XlosResult(xlos_oracle_m1(scenario, k), "oracle_m1", k)
    q = XlosQuery(scenario, k, order, options, half_height)
    if method == "closed_form":
        return xlos_closed_form(q)
    if method == "asymptotic_high":
        return xlos_asymptotic(q, "high")
    if method == "asymptotic_low":
        return xlos_asymptotic(q, "low")
    raise ValueError(f"unknown method {method!r}")


def sweep(scenario: Scenario, grid: Iterable[float], methods: Iterable[str] = ("closed_form",),
          order: int | None = None, options: EvalOptions = EvalOptions(),
          half_height: float | None = None):
    """One XlosResult per (K_th, method), grid-major."""
    grid = [float(k) for k in grid]
    methods = list(methods)
    if not grid:
        raise ValueError("empty threshold grid")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    return [_run(m, scenario, k, order, options, half_height) for k in grid for m in methods]
