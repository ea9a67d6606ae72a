"""Multi-tier network scenarios and the quantities derived from them.

Each tier is mapped to an equivalent unit-power PPP with density
lambda_n * Omega_n, where Omega_n = P_n^{2/nu} E[X_n^{2/nu}] folds transmit
power and lognormal shadowing together.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

__all__ = [
    "ChannelModel",
    "TierConfig",
    "Scenario",
    "DerivedNetwork",
    "ScenarioFileError",
    "fractional_moment",
    "k_intercept",
    "derive",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "bundled_scenario",
    "BUNDLED_SCENARIOS",
]

_DB = math.log(10.0) / 5.0
BUNDLED_SCENARIOS = ("udn", "hetnet", "ldn")


class ScenarioFileError(ValueError):
    def __init__(self, field_name, message):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class ChannelModel:
    """Path loss and K-factor calibration; defaults are the suburban 2 GHz fit."""

    nu: float = 3.0
    alpha: float = 0.5
    kappa1: float = 0.46
    kappa2: float = -0.62
    K0: float = 10.0
    h0: float = 3.0
    theta0: float = 17.0
    sigmaK_dB: float = 3.0
    seasonal: float = 1.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.kappa1 > 0:
            raise ValueError("kappa1 must be positive")
        if not self.kappa2 < 0:
            raise ValueError("kappa2 must be negative")
        if not self.K0 > 0 or not self.seasonal > 0:
            raise ValueError("K0 and the seasonal factor must be positive")
        if not (self.h0 > 0 and self.theta0 > 0):
            raise ValueError("reference height and beamwidth must be positive")
        if not self.sigmaK_dB >= 0:
            raise ValueError("sigmaK_dB must be nonnegative")


@dataclass(frozen=True)
class TierConfig:
    lam: float
    power_dBm: float
    height: float
    beamwidth: float
    shadow_mu_dB: float = 0.0
    shadow_sigma_dB: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("tier density must be positive")
        if not self.height > 0:
            raise ValueError("tier height must be positive")
        if not (0 < self.beamwidth <= 360):
            raise ValueError("beamwidth must lie in (0, 360]")
        if not self.shadow_sigma_dB >= 0:
            raise ValueError("shadowing sigma must be nonnegative")

    @property
    def power_mW(self):
        return 10.0 ** (self.power_dBm / 10.0)


@dataclass(frozen=True)
class Scenario:
    channel: ChannelModel
    tiers: tuple[TierConfig, ...]
    monitor_set_size: int = 1
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tiers", tuple(self.tiers))
        if not self.tiers:
            raise ValueError("a scenario needs at least one tier")
        if not (isinstance(self.monitor_set_size, int) and self.monitor_set_size >= 1):
            raise ValueError("monitor_set_size must be a positive integer")

    @property
    def M(self):
        return self.monitor_set_size

    def with_M(self, M):
        return Scenario(self.channel, self.tiers, M, self.name)


@dataclass(frozen=True)
class DerivedNetwork:
    omega: np.ndarray
    lambda_tilde: np.ndarray
    rho: np.ndarray
    K: np.ndarray
    Lambda: np.ndarray
    lambda_T: float
    alpha: float = field(default=0.5)
    sigmaK_dB: float = field(default=3.0)

    @property
    def n_tiers(self):
        return len(self.omega)


def fractional_moment(mu_dB: float, sigma_dB: float, nu: float) -> float:
    """E[X^{2/nu}] for X lognormal with decibel mean mu_dB and std sigma_dB."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    if sigma_dB < 0:
        raise ValueError("sigma_dB must be nonnegative")
    return math.exp(_DB * mu_dB / nu + 0.5 * (_DB * sigma_dB / nu) ** 2)


def k_intercept(tier: TierConfig, channel: ChannelModel) -> float:
    """K_n = (h/h0)^kappa1 (theta/theta0)^kappa2 K0, K0 scaled by the seasonal factor."""
    return ((tier.height / channel.h0) ** channel.kappa1
            * (tier.beamwidth / channel.theta0) ** channel.kappa2
            * channel.K0 * channel.seasonal)


def derive(scenario: Scenario) -> DerivedNetwork:
    ch = scenario.channel
    omega = np.array([t.power_mW ** (2.0 / ch.nu)
                      * fractional_moment(t.shadow_mu_dB, t.shadow_sigma_dB, ch.nu)
                      for t in scenario.tiers])
    lam = np.array([t.lam for t in scenario.tiers])
    lt = lam * omega
    lambda_T = float(math.fsum(lt))
    return DerivedNetwork(
        omega=omega,
        lambda_tilde=lt,
        rho=lt / lambda_T,
        K=np.array([k_intercept(t, ch) for t in scenario.tiers]),
        Lambda=omega / (math.pi * lambda_T),
        lambda_T=lambda_T,
        alpha=ch.alpha,
        sigmaK_dB=ch.sigmaK_dB,
    )


# -- scenario files --------------------------------------------------------

_CHANNEL_KEYS = {"nu": "nu", "alpha": "alpha", "kappa1": "kappa1", "kappa2": "kappa2",
                 "K0": "K0", "h0_m": "h0", "theta0_deg": "theta0", "sigmaK_dB": "sigmaK_dB",
                 "seasonal": "seasonal"}
_TIER_KEYS = {"lambda": "lam", "power_dBm": "power_dBm", "height_m": "height",
              "beamwidth_deg": "beamwidth", "shadow_mu_dB": "shadow_mu_dB",
              "shadow_sigma_dB": "shadow_sigma_dB"}
_TIER_REQUIRED = ("lambda", "power_dBm", "height_m", "beamwidth_deg")


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioFileError(where, "expected a number")
    return float(value)


def scenario_from_dict(data) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioFileError("<root>", "expected an object")
    ch_raw = data.get("channel", {})
    if not isinstance(ch_raw, dict):
        raise ScenarioFileError("channel", "expected an object")
    unknown = set(ch_raw) - set(_CHANNEL_KEYS)
    if unknown:
        raise ScenarioFileError("channel", f"unknown keys {sorted(unknown)}")
    try:
        channel = ChannelModel(**{_CHANNEL_KEYS[k]: _number(v, f"channel.{k}")
                                  for k, v in ch_raw.items()})
    except ScenarioFileError:
        raise
    except ValueError as exc:
        raise ScenarioFileError("channel", str(exc)) from None
    tiers_raw = data.get("tiers")
    if not isinstance(tiers_raw, list) or not tiers_raw:
        raise ScenarioFileError("tiers", "expected a nonempty list")
    tiers = []
    for j, t in enumerate(tiers_raw):
        where = f"tiers[{j}]"
        if not isinstance(t, dict):
            raise ScenarioFileError(where, "expected an object")
        for k in _TIER_REQUIRED:
            if k not in t:
                raise ScenarioFileError(f"{where}.{k}", "missing")
        unknown = set(t) - set(_TIER_KEYS)
        if unknown:
            raise ScenarioFileError(where, f"unknown keys {sorted(unknown)}")
        try:
            tiers.append(TierConfig(**{_TIER_KEYS[k]: _number(v, f"{where}.{k}")
                                       for k, v in t.items()}))
        except ScenarioFileError:
            raise
        except ValueError as exc:
            raise ScenarioFileError(where, str(exc)) from None
    M = data.get("monitor_set_size", 1)
    if isinstance(M, bool) or not isinstance(M, int) or M < 1:
        raise ScenarioFileError("monitor_set_size", "must be a positive integer")
    return Scenario(channel, tuple(tiers), M, str(data.get("name", "")))


def scenario_to_dict(scenario: Scenario):
    ch = asdict(scenario.channel)
    inv_ch = {v: k for k, v in _CHANNEL_KEYS.items()}
    inv_t = {v: k for k, v in _TIER_KEYS.items()}
    return {
        "name": scenario.name,
        "channel": {inv_ch[k]: v for k, v in ch.items()},
        "tiers": [{inv_t[k]: v for k, v in asdict(t).items()} for t in scenario.tiers],
        "monitor_set_size": scenario.monitor_set_size,
    }


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError("<json>", str(exc)) from None
    return scenario_from_dict(data)


def bundled_scenario(name: str) -> Scenario:
    """One of the shipped scenarios: 'udn', 'hetnet' or 'ldn'."""
    if name not in BUNDLED_SCENARIOS:
        raise KeyError(f"unknown bundled scenario {name!r}")
    text = resources.files("xlosfox").joinpath("data").joinpath(f"{name}.json").read_text()
    return scenario_from_dict(json.loads(text))


def bundled_path(name: str):
    return resources.files("xlosfox").joinpath("data").joinpath(name)
