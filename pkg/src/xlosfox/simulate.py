"""Monte-Carlo ground truth for the XLOS probability and the nearest-point law.

Trials are grouped into fixed-size blocks; block b draws from its own
generator, seeded by (seed, b), so results do not depend on how blocks are
scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaincinv, gammaln

from .foxh import worker_count
from .network import Scenario, derive

__all__ = [
    "SimConfig",
    "SimResult",
    "DistanceSamples",
    "WindowTooSmallError",
    "TRIAL_BLOCK",
    "auto_radius",
    "simulate_equivalent",
    "simulate_physical",
    "nearest_distances",
    "empirical_joint_distance_pdf",
    "joint_distance_pdf",
    "marginal_distance_pdf",
    "marginal_distance_cdf",
]

TRIAL_BLOCK = 4096
_WINDOW_TAIL = 1e-6
_WINDOW_SLACK = 30
# shadowing draws beyond this many std devs are treated as impossible when
# sizing the physical-domain window
_SHADOW_SIGMAS = 4.0


class WindowTooSmallError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    trials: int = 100_000
    window_radius: float | None = None
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if not (isinstance(self.trials, (int, np.integer)) and self.trials >= 1):
            raise ValueError("trials must be a positive integer")
        if self.window_radius is not None and not self.window_radius > 0:
            raise ValueError("window_radius must be positive")


@dataclass(frozen=True)
class SimResult:
    estimate: float
    ci95_halfwidth: float
    trials: int
    seed: int
    window_radius: float = float("nan")


def auto_radius(lambda_T: float, M: int) -> float:
    """Disk radius whose expected point count is the 1 - 1e-6 quantile of Gamma(M + 30)."""
    q = float(gammaincinv(M + _WINDOW_SLACK, 1.0 - _WINDOW_TAIL))
    return math.sqrt(q / (math.pi * lambda_T))


def _block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _map_blocks(fn, trials, workers):
    starts = list(range(0, trials, TRIAL_BLOCK))
    jobs = [(b, min(TRIAL_BLOCK, trials - st)) for b, st in enumerate(starts)]
    workers = workers or worker_count()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda j: fn(*j), jobs))
    return [fn(*j) for j in jobs]


def _disk_points(rng, n_trials, densities, radius):
    """Radii and tier labels of PPPs in a disk, flattened with a trial index."""
    counts = rng.poisson(np.asarray(densities) * math.pi * radius**2, size=(n_trials, len(densities)))
    per_trial = counts.sum(axis=1)
    total = int(per_trial.sum())
    trial = np.repeat(np.arange(n_trials), per_trial)
    tier = np.concatenate([np.repeat(np.arange(len(densities)), c) for c in counts]) \
        if total else np.empty(0, dtype=int)
    r = radius * np.sqrt(rng.random(total))
    return trial, tier, r, per_trial


def _top_m(trial, key, per_trial, M, n_trials):
    """Flat indices of the M smallest keys in each trial, row-sorted by key."""
    if np.any(per_trial < M):
        bad = int(np.flatnonzero(per_trial < M)[0])
        raise WindowTooSmallError(
            f"trial {bad} has {int(per_trial[bad])} points in the window, need {M}")
    order = np.lexsort((key, trial))
    offsets = np.concatenate(([0], np.cumsum(per_trial)[:-1]))
    idx = offsets[:, None] + np.arange(M)[None, :]
    return order[idx]


def _result(successes, trials, seed, radius):
    p = successes / trials
    return SimResult(p, 1.96 * math.sqrt(p * (1.0 - p) / trials), trials, seed, radius)


def simulate_equivalent(scenario: Scenario, K_th_dB: float, cfg: SimConfig = SimConfig()) -> SimResult:
    """Equivalent-domain simulation: unit-power PPPs of density lambda_n Omega_n.

    The M nearest points are monitored; point y of tier n has
    K = K_n gamma Omega_n^{-alpha/2} |y|^{-alpha} with gamma lognormal.
    """
    net = derive(scenario)
    M = scenario.monitor_set_size
    radius = cfg.window_radius or auto_radius(net.lambda_T, M)
    K_th = 10.0 ** (K_th_dB / 10.0)
    scale = net.K * net.omega ** (-net.alpha / 2.0)
    sig = net.sigmaK_dB / 10.0 * math.log(10.0)

    def block(b, n):
        rng = _block_rng(cfg.seed, b)
        trial, tier, r, per_trial = _disk_points(rng, n, net.lambda_tilde, radius)
        # one gamma per point keeps runs with different M coupled
        gamma = np.exp(sig * rng.standard_normal(len(r)))
        sel = _top_m(trial, r, per_trial, M, n)
        K = scale[tier[sel]] * gamma[sel] * r[sel] ** (-net.alpha)
        return int(np.count_nonzero(np.any(K > K_th, axis=1)))

    return _result(sum(_map_blocks(block, cfg.trials, cfg.workers)), cfg.trials, cfg.seed, radius)


def simulate_physical(scenario: Scenario, K_th_dB: float, cfg: SimConfig = SimConfig()) -> SimResult:
    """Physical-domain simulation with RSRP-based selection of the M strongest cells.

    RSRP = P_n X r^{-nu} with lognormal shadowing X per base station; the
    K-factor uses the physical distance, K = K_n gamma r^{-alpha}.
    """
    net = derive(scenario)
    ch = scenario.channel
    M = scenario.monitor_set_size
    P = np.array([t.power_mW for t in scenario.tiers])
    mu = np.array([t.shadow_mu_dB for t in scenario.tiers])
    sd = np.array([t.shadow_sigma_dB for t in scenario.tiers])
    lam = np.array([t.lam for t in scenario.tiers])
    if cfg.window_radius:
        radius = cfg.window_radius
    else:
        # a cell outside this disk cannot beat the M-th nearest equivalent point
        x_hi = 10.0 ** ((mu + _SHADOW_SIGMAS * sd) / 10.0)
        radius = auto_radius(net.lambda_T, M) * float(np.max(P * x_hi)) ** (1.0 / ch.nu)
    K_th = 10.0 ** (K_th_dB / 10.0)
    ln10 = math.log(10.0) / 10.0
    sig = net.sigmaK_dB * ln10

    def block(b, n):
        rng = _block_rng(cfg.seed, b)
        trial, tier, r, per_trial = _disk_points(rng, n, lam, radius)
        x_db = mu[tier] + sd[tier] * rng.standard_normal(len(r))
        gamma = np.exp(sig * rng.standard_normal(len(r)))
        # strongest first: smallest -log(RSRP)
        loss = ch.nu * np.log(r) - np.log(P[tier]) - ln10 * x_db
        sel = _top_m(trial, loss, per_trial, M, n)
        K = net.K[tier[sel]] * gamma[sel] * r[sel] ** (-net.alpha)
        return int(np.count_nonzero(np.any(K > K_th, axis=1)))

    return _result(sum(_map_blocks(block, cfg.trials, cfg.workers)), cfg.trials, cfg.seed, radius)


# -- nearest-point distances -----------------------------------------------

def nearest_distances(lambda_T: float, M: int, cfg: SimConfig) -> np.ndarray:
    """Distances to the M nearest points of a PPP(lambda_T), shape (trials, M), row-sorted."""
    radius = cfg.window_radius or auto_radius(lambda_T, M)

    def block(b, n):
        rng = _block_rng(cfg.seed, b)
        trial, _, r, per_trial = _disk_points(rng, n, [lambda_T], radius)
        return r[_top_m(trial, r, per_trial, M, n)]

    return np.concatenate(_map_blocks(block, cfg.trials, cfg.workers))


def joint_distance_pdf(z, lambda_T: float, alpha: float):
    """Joint density of (z_1, ..., z_M), z_m = r_m^alpha, on the ordered cone; 0 elsewhere."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    M = z.shape[1]
    ordered = np.all(np.diff(z, axis=1) >= 0, axis=1) & np.all(z > 0, axis=1)
    zs = np.where(z > 0, z, 1.0)
    log_f = (M * math.log(2.0 * math.pi * lambda_T / alpha)
             - math.pi * lambda_T * zs[:, -1] ** (2.0 / alpha)
             + (2.0 / alpha - 1.0) * np.sum(np.log(zs), axis=1))
    return np.where(ordered, np.exp(log_f), 0.0)


def marginal_distance_pdf(z, m: int, lambda_T: float, alpha: float):
    """Density of z_m = r_m^alpha; pi lambda_T r_m^2 is Gamma(m, 1)."""
    z = np.asarray(z, dtype=float)
    a = math.pi * lambda_T
    zs = np.where(z > 0, z, 1.0)
    u = a * zs ** (2.0 / alpha)
    log_f = (math.log(2.0 / alpha) + m * math.log(a) + (2.0 * m / alpha - 1.0) * np.log(zs)
             - u - gammaln(m))
    return np.where(z > 0, np.exp(log_f), 0.0)


def marginal_distance_cdf(z, m: int, lambda_T: float, alpha: float):
    z = np.asarray(z, dtype=float)
    return gammainc(m, math.pi * lambda_T * np.clip(z, 0.0, None) ** (2.0 / alpha))


@dataclass(frozen=True)
class DistanceSamples:
    """Sampled z (trials, M) plus per-neighbor histograms and the analytic density on the same bins."""

    z: np.ndarray
    edges: tuple[np.ndarray, ...]
    density: tuple[np.ndarray, ...]
    analytic: tuple[np.ndarray, ...]
    counts: tuple[np.ndarray, ...]


def empirical_joint_distance_pdf(lambda_T: float, alpha: float, M: int, cfg: SimConfig,
                                 bins: int = 50) -> DistanceSamples:
    z = nearest_distances(lambda_T, M, cfg) ** alpha
    edges, dens, ana, counts = [], [], [], []
    for m in range(M):
        cnt, e = np.histogram(z[:, m], bins=bins)
        width = np.diff(e)
        edges.append(e)
        counts.append(cnt)
        dens.append(cnt / (len(z) * width))
        # bin-averaged analytic density, comparable with the histogram
        cdf = marginal_distance_cdf(e, m + 1, lambda_T, alpha)
        ana.append(np.diff(cdf) / width)
    return DistanceSamples(z, tuple(edges), tuple(dens), tuple(ana), tuple(counts))
