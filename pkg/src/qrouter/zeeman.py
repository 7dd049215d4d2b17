"""Magnetic-gradient manipulation of the spin wave and motional dephasing estimates."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constants as const

#: (mu_g - mu_s)/hbar of an electronic spin flip, rad/(s G).
MU_DIFF_OVER_HBAR = 17.6e6
#: G/cm -> G/m
_PER_CM = 100.0

COMFORTABLE = "comfortable"
MARGINAL = "marginal"
INFEASIBLE = "infeasible"
#: comfortable when the manipulation fits this many times into t_decoh
SAFETY_FACTOR = 10.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ZeemanConfig:
    """Gradient coil operating point. ``gradient`` in G/cm, ``t_rise`` in s."""

    gradient: float = 50.0
    mu_diff_over_hbar: float = MU_DIFF_OVER_HBAR
    t_rise: float = 5e-6

    def __post_init__(self):
        if not self.gradient > 0:
            raise ConfigError("gradient must be positive")
        if self.mu_diff_over_hbar == 0 or not math.isfinite(self.mu_diff_over_hbar):
            raise ConfigError("mu_diff_over_hbar must be finite and nonzero")
        if not self.t_rise >= 0:
            raise ConfigError("t_rise must be nonnegative")

    @property
    def gradient_si(self) -> float:
        """Gradient in G/m."""
        return self.gradient * _PER_CM

    @property
    def rate(self) -> float:
        """Wavenumber written per second, 1/(m s)."""
        return abs(self.mu_diff_over_hbar) * self.gradient_si

    @classmethod
    def fast_small_angle(cls) -> "ZeemanConfig":
        """Weaker gradient with a much shorter rise time."""
        return cls(gradient=7.0, t_rise=0.1e-6)


@dataclass(frozen=True)
class ManipulationPlan:
    delta: tuple[float, float]
    duration: float
    total_time: float

    @property
    def phase_profile(self) -> str:
        return f"phi(r) = {self.delta[0]:.6g}*x + {self.delta[1]:.6g}*y"


def manipulation_time(delta_mag: float, cfg: ZeemanConfig | None = None) -> float:
    """Gradient-on time writing a wavenumber ``delta_mag`` (1/m)."""
    cfg = cfg or ZeemanConfig()
    if delta_mag < 0:
        raise ValueError("delta_mag must be nonnegative")
    return delta_mag / cfg.rate


def plan_manipulation(delta, cfg: ZeemanConfig | None = None) -> ManipulationPlan:
    cfg = cfg or ZeemanConfig()
    d = np.asarray(delta, dtype=float).reshape(2)
    T = manipulation_time(float(np.hypot(d[0], d[1])), cfg)
    return ManipulationPlan((float(d[0]), float(d[1])), T, T + 2.0 * cfg.t_rise)


def accumulated_phase(delta, r) -> float:
    """Phase ``delta . r`` written into the spin wave at position ``r`` (global constant dropped)."""
    d = np.asarray(delta, dtype=float)
    return float(np.dot(d, np.asarray(r, dtype=float)))


def gradient_field(r, delta, cfg: ZeemanConfig, B0: float = 0.0) -> float:
    """Field (G) at ``r`` (m) for a gradient pointing along ``delta``."""
    d = np.asarray(delta, dtype=float)
    n = float(np.hypot(d[0], d[1]))
    if n == 0:
        return B0
    return B0 + cfg.gradient_si * float(np.dot(d / n, np.asarray(r, dtype=float))) * math.copysign(
        1.0, cfg.mu_diff_over_hbar)


def thermal_velocity(temperature: float, mass: float = const.M_RB87) -> float:
    return math.sqrt(const.K_BOLTZMANN * temperature / mass)


def decoherence_time(temperature: float, kappa_mag: float) -> float:
    """Ballistic dephasing time ``1/(v_th kappa)``; infinite for ``kappa_mag = 0``."""
    if temperature < 0 or kappa_mag < 0:
        raise ValueError("temperature and kappa_mag must be nonnegative")
    if kappa_mag == 0:
        return math.inf
    if temperature == 0:
        return math.inf
    return 1.0 / (thermal_velocity(temperature) * kappa_mag)


@dataclass(frozen=True)
class FeasibilityCell:
    temperature: float
    kappa_mag: float
    t_decoh: float
    t_manip: float
    manipulable: str


def classify(t_manip: float, t_decoh: float) -> str:
    if t_manip < t_decoh / SAFETY_FACTOR:
        return COMFORTABLE
    if t_manip < t_decoh:
        return MARGINAL
    return INFEASIBLE


def feasibility_map(temps, kappas, cfg: ZeemanConfig | None = None) -> list[list[FeasibilityCell]]:
    """Rows over ``temps`` (K), columns over ``kappas`` (1/m).

    A zero wavevector needs no manipulation at all and is always comfortable.
    """
    cfg = cfg or ZeemanConfig()
    out = []
    for T in temps:
        row = []
        for k in kappas:
            td = decoherence_time(T, k)
            tm = manipulation_time(k, cfg) + 2.0 * cfg.t_rise if k > 0 else 0.0
            row.append(FeasibilityCell(float(T), float(k), td, tm, classify(tm, td)))
        out.append(row)
    return out


def write_feasibility_csv(cells, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["temperature_K", "kappa_per_m", "t_decoh_s", "t_manip_s", "class"])
        for row in cells:
            for c in row:
                w.writerow([repr(c.temperature), repr(c.kappa_mag), repr(c.t_decoh), repr(c.t_manip),
                            c.manipulable])
    return path


def momentum_cancellation(kappa, delta) -> tuple[np.ndarray, np.ndarray]:
    """Erase the stored grating right after absorption, restore it with the manipulation before emission."""
    k = np.asarray(kappa, dtype=float).reshape(2)
    d = np.asarray(delta, dtype=float).reshape(2)
    d1 = -k
    return d1, -d1 + d
