"""Wavevector bookkeeping, spin-wave phase ramps and mode-mismatch fits.

Vectors are 2D numpy arrays in the xy-plane, in 1/m unless noted. The signal
always travels along +x, so ``k_s = (|k_s|, 0)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize as sopt

from .core import ComplexField, PhysicalUnits


class FitError(ValueError):
    """Gaussian fit impossible (too few or nonpositive samples)."""


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(2)
    return a


def unit(angle: float) -> np.ndarray:
    return np.array([math.cos(angle), math.sin(angle)])


def delta_for_angle(phi: float, k_s_mag: float) -> np.ndarray:
    """Manipulation turning ``k_s`` into a vector of equal length at angle ``phi``."""
    return k_s_mag * np.array([math.cos(phi) - 1.0, math.sin(phi)])


def kappa_of(theta: float, k_s_mag: float, k_c_mag: float) -> np.ndarray:
    """Spin-wave wavevector ``k_s - k_c`` written by a control at angle ``theta``."""
    if not (k_s_mag > 0 and k_c_mag > 0):
        raise ValueError("wavenumbers must be positive")
    return np.array([k_s_mag, 0.0]) - k_c_mag * unit(theta)


def emitted_wavevector(kappa_prime, k_c_prime, k_s_mag: float) -> tuple[np.ndarray, float]:
    """Phase-matched emission ``k_s' = kappa' + k_c'`` and its signed shell mismatch."""
    ks = _vec(kappa_prime) + _vec(k_c_prime)
    return ks, float(np.hypot(ks[0], ks[1]) - k_s_mag)


@dataclass(frozen=True)
class PhaseRamp:
    """Linear phase ``exp(i delta . r)`` imprinted on the spin wave (delta in 1/m)."""

    delta: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        d = tuple(float(v) for v in np.asarray(self.delta, dtype=float).reshape(2))
        if not all(math.isfinite(v) for v in d):
            raise ValueError("phase ramp must be finite")
        object.__setattr__(self, "delta", d)

    @classmethod
    def for_angle(cls, phi: float, k_s_mag: float) -> "PhaseRamp":
        return cls(tuple(delta_for_angle(phi, k_s_mag)))

    def dimensionless(self, L: float) -> np.ndarray:
        """Ramp in units of 1/L (grid coordinates)."""
        return np.asarray(self.delta) * L

    def __neg__(self):
        return PhaseRamp((-self.delta[0], -self.delta[1]))

    def __add__(self, other: "PhaseRamp"):
        return PhaseRamp((self.delta[0] + other.delta[0], self.delta[1] + other.delta[1]))


@dataclass(frozen=True)
class WaveGeometry:
    """All wavevectors of one absorb / manipulate / emit scenario."""

    k_s: np.ndarray
    k_c: np.ndarray
    kappa: np.ndarray
    delta: np.ndarray
    k_s_prime: np.ndarray
    k_c_prime: np.ndarray
    theta: float
    phi: float
    k_mis: float

    @classmethod
    def build(cls, theta: float, delta, k_s_mag: float, k_c_mag: float,
              k_c_prime=None) -> "WaveGeometry":
        k_s = np.array([k_s_mag, 0.0])
        k_c = k_c_mag * unit(theta)
        kappa = k_s - k_c
        delta = _vec(delta)
        k_cp = k_c.copy() if k_c_prime is None else _vec(k_c_prime)
        ksp, k_mis = emitted_wavevector(kappa + delta, k_cp, k_s_mag)
        return cls(k_s, k_c, kappa, delta, ksp, k_cp, float(theta),
                   float(math.atan2(ksp[1], ksp[0])), k_mis)

    @classmethod
    def for_units(cls, theta: float, delta, units: PhysicalUnits, k_c_prime=None) -> "WaveGeometry":
        return cls.build(theta, delta, units.k_s_mag, units.k_c_mag, k_c_prime)


def emission_geometry(ramp: PhaseRamp, theta: float, units: PhysicalUnits) -> tuple[float, float]:
    """Emission angle and mismatch (1/m) when ``ramp`` is applied and the same control retrieves."""
    g = WaveGeometry.for_units(theta, ramp.delta, units)
    return g.phi, g.k_mis


def apply_phase_ramp(S: ComplexField, ramp: PhaseRamp, L: float) -> ComplexField:
    """Multiply the spin wave by ``exp(i delta . r)``; grid coordinates are in units of ``L``."""
    dx, dy = ramp.dimensionless(L)
    if dx == 0.0 and dy == 0.0:
        return ComplexField(S.values.copy(), S.grid)
    g = S.grid
    phase = np.exp(1j * dx * g.x)[:, None] * np.exp(1j * dy * g.y)[None, :]
    return ComplexField(S.values * phase, g)


# --- tolerance of the manipulation -------------------------------------------

def _perp(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


def mismatch_from_error(phi: float, k_s_mag: float, eps: float, direction: str = "parallel") -> float:
    """Exact mismatch (1/m) when ``delta_for_angle(phi)`` carries a relative error ``eps``.

    ``parallel`` scales delta by ``1 + eps``; ``perpendicular`` adds ``eps |delta|``
    along delta rotated by +90 degrees.
    """
    d = delta_for_angle(phi, k_s_mag)
    if direction == "parallel":
        err = eps * d
    elif direction == "perpendicular":
        err = eps * _perp(d)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    ks = np.array([k_s_mag, 0.0]) + d + err
    return float(np.hypot(ks[0], ks[1]) - k_s_mag)


def mismatch_slope(phi: float, k_s_mag: float, direction: str = "parallel") -> float:
    """First derivative of :func:`mismatch_from_error` at ``eps = 0``."""
    if direction == "parallel":
        return k_s_mag * (1.0 - math.cos(phi))
    if direction == "perpendicular":
        return -k_s_mag * math.sin(phi)
    raise ValueError(f"unknown direction {direction!r}")


def error_tolerance(phi: float, k_s_mag: float, k_sigma: float, direction: str = "parallel") -> float:
    """Smallest positive relative error in delta producing ``|k_mis| = k_sigma``.

    Returns ``inf`` for ``phi = 0`` (no manipulation to get wrong).
    """
    if k_sigma <= 0:
        raise ValueError("k_sigma must be positive")
    slope = abs(mismatch_slope(phi, k_s_mag, direction))
    if slope == 0.0 and direction == "parallel":
        return math.inf
    f = lambda e: abs(mismatch_from_error(phi, k_s_mag, e, direction)) - k_sigma
    hi = k_sigma / slope if slope > 0 else math.sqrt(k_sigma / k_s_mag)
    hi = max(hi, 1e-300)
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e6:
            return math.inf
    return float(sopt.brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps))


# --- Gaussian suppression fits -----------------------------------------------

def fit_gaussian_suppression(samples) -> tuple[float, float]:
    """Fit ``eta = eta0 exp(-k**2 / w**2)`` by least squares on ``log eta``; returns ``(w, eta0)``."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 5:
        raise FitError("need at least 5 (k_mis, eta) samples")
    k, eta = arr[:, 0], arr[:, 1]
    if not np.all(eta > 0):
        raise FitError("efficiencies must be positive for a log-space fit")
    A = np.column_stack([np.ones_like(k), -(k**2)])
    (c0, c1), *_ = np.linalg.lstsq(A, np.log(eta), rcond=None)
    # suppression below rounding level over the sampled range counts as none
    if not c1 * np.max(k**2) > 1e-9:
        raise FitError("data show no suppression with |k_mis|")
    return 1.0 / math.sqrt(c1), math.exp(c0)


def write_mismatch_csv(path, k_values, etas, fit, k_column: str = "k_mis_gamma_over_c") -> tuple[Path, Path]:
    """Sweep table plus a companion ``*_fit.csv`` holding ``(w, eta0)``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([k_column, "eta"])
        for k, e in zip(k_values, etas):
            w.writerow([repr(float(k)), repr(float(e))])
    fit_path = path.with_name(path.stem + "_fit.csv")
    with fit_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["w", "eta0"])
        w.writerow([repr(float(fit[0])), repr(float(fit[1]))])
    return path, fit_path


def mismatch_sweep_absorption(params, signal, control, k_values, samples: int = 20):
    """Absorption efficiency against signal mismatch (units of gamma/c)."""
    from dataclasses import replace

    from .solver import run_absorption

    return np.array([run_absorption(params, replace(signal, k_mis=float(k)), control,
                                    samples=samples).eta_abs for k in k_values])


def mismatch_sweep_emission(params, signal, control, k_values, phi: float = 0.0,
                            control_em=None, samples: int = 20):
    """Total efficiency against a mismatch (units of 1/L) imprinted on the stored spin wave."""
    from .solver import run_absorption, run_emission, run_storage

    absorbed = run_absorption(params, signal, control, samples=samples)
    stored = run_storage(absorbed.state, params)
    out = []
    for k in k_values:
        rep, _ = run_emission(stored.S, params, control_em or control, phi, k_mis=float(k), samples=samples)
        out.append(absorbed.eta_abs * rep.eta_em)
    return np.array(out)
