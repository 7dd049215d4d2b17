"""Incoming Gaussian signal and the prescribed (undepleted) control field."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import ComplexField, GridSpec, ParameterError


def wrap_angle(angle: float) -> float:
    """Map an angle onto ``(-pi, pi]``."""
    a = math.remainder(angle, 2.0 * math.pi)
    return math.pi if a == -math.pi else a


@dataclass(frozen=True)
class SignalSpec:
    """Gaussian signal pulse travelling along +x.

    ``k_mis`` is a wavenumber mismatch in units of ``gamma/c``; it shifts the
    carrier frequency by ``k_mis * gamma``.
    """

    w_par: float = 100.0
    w_perp: float = 0.2
    arrival_t: float = 0.0
    k_mis: float = 0.0

    def __post_init__(self):
        if not (self.w_par > 0 and self.w_perp > 0):
            raise ParameterError("signal widths must be positive")


@dataclass(frozen=True)
class ControlSpec:
    """Gaussian control pulse moving at speed ``c_tilde`` along direction ``theta``.

    At time ``t0`` its peak sits at ``(x0, y0)``.
    """

    amplitude: float = 50.0
    w_par: float = 100.0
    w_perp: float = 1.0
    t0: float = 0.0
    x0: float = 0.0
    y0: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ParameterError("control amplitude must be nonnegative")
        if not (self.w_par > 0 and self.w_perp > 0):
            raise ParameterError("control widths must be positive")
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @property
    def direction(self) -> tuple[float, float]:
        return math.cos(self.theta), math.sin(self.theta)

    def peak_position(self, t: float, c_tilde: float) -> tuple[float, float]:
        ex, ey = self.direction
        s = c_tilde * (t - self.t0)
        return self.x0 + s * ex, self.y0 + s * ey

    def crossing_time(self, c_tilde: float) -> float:
        """Time at which the peak passes closest to the cloud centre."""
        ex, ey = self.direction
        return self.t0 - (self.x0 * ex + self.y0 * ey) / c_tilde

    def in_frame(self, phi: float) -> "ControlSpec":
        """Same physical pulse described in axes rotated by ``phi``."""
        c, s = math.cos(phi), math.sin(phi)
        return replace(
            self,
            x0=c * self.x0 + s * self.y0,
            y0=-s * self.x0 + c * self.y0,
            theta=wrap_angle(self.theta - phi),
        )


def signal_amplitude(spec: SignalSpec, grid: GridSpec) -> float:
    """Peak amplitude giving one photon on the x-lattice of ``grid``.

    The longitudinal sum over the infinite lattice is replaced by its integral
    (exact up to ``exp(-pi**2 w**2 / (2 dx**2))``); the transverse sum runs over
    the grid's y samples.
    """
    long_norm = spec.w_par * math.sqrt(math.pi / 2.0)
    trans_norm = float(np.sum(np.exp(-2.0 * (grid.y / spec.w_perp) ** 2))) * grid.dy
    return 1.0 / math.sqrt(long_norm * trans_norm * grid.z_factor)


def signal_profile(spec: SignalSpec, grid: GridSpec, xi: np.ndarray) -> np.ndarray:
    """Envelope at co-moving coordinates ``xi = x - c (t - arrival_t)``; shape ``xi.shape + (ny,)``."""
    xi = np.asarray(xi, dtype=float)
    amp = signal_amplitude(spec, grid)
    along = np.exp(-((xi / spec.w_par) ** 2))
    if spec.k_mis:
        along = along * np.exp(1j * spec.k_mis * xi / grid.c_tilde)
    across = np.exp(-((grid.y / spec.w_perp) ** 2))
    return amp * np.multiply.outer(along, across).astype(np.complex128)


def signal_envelope(spec: SignalSpec, grid: GridSpec, t: float) -> ComplexField:
    """Freely propagating signal on ``grid`` at time ``t``."""
    xi = grid.x - grid.c_tilde * (t - spec.arrival_t)
    return ComplexField(signal_profile(spec, grid, xi), grid)


def control_coordinates(spec: ControlSpec, x, y):
    """Coordinates along and across the control direction, relative to ``(x0, y0)``."""
    ex, ey = spec.direction
    dx = np.asarray(x) - spec.x0
    dy = np.asarray(y) - spec.y0
    return dx * ex + dy * ey, -dx * ey + dy * ex


def control_field(spec: ControlSpec, grid: GridSpec, t: float) -> ComplexField:
    """Control amplitude ``Omega(x, y, t)`` on the grid."""
    X, Y = grid.mesh()
    u_par, u_perp = control_coordinates(spec, X, Y)
    s = grid.c_tilde * (t - spec.t0)
    vals = spec.amplitude * np.exp(-(((u_par - s) / spec.w_par) ** 2) - (u_perp / spec.w_perp) ** 2)
    return ComplexField(vals.astype(np.complex128), grid)
