"""Dimensionless parameterization, grids and analytic efficiency curves.

Lengths are measured in units of the cloud scale ``L`` (cloud volume ``L**3``),
times in units of the excited-state lifetime ``1/gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from . import constants as const

#: Radius of a sphere of unit volume.
UNIT_SPHERE_RADIUS = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
#: Ratio of the optical depth measured across the cloud diameter to the L-based one.
DIAMETER_DEPTH_FACTOR = 2.0 * UNIT_SPHERE_RADIUS


class ParameterError(ValueError):
    """Invalid system or grid parameters."""


@dataclass(frozen=True)
class PhysicalUnits:
    """SI scales that fix the dimensionless system.

    Defaults describe a 10 mm rubidium-87 cloud with ``c_tilde = 850``.
    """

    L: float = 0.01
    gamma: float = const.C_LIGHT / (850.0 * 0.01)
    c: float = const.C_LIGHT
    k_s_mag: float = 2.0 * math.pi / const.LAMBDA_D1
    omega_gs: float = const.OMEGA_GS_RB87

    def __post_init__(self):
        for name in ("L", "gamma", "c", "k_s_mag", "omega_gs"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")

    @property
    def c_tilde(self) -> float:
        return self.c / (self.gamma * self.L)

    @property
    def k_c_mag(self) -> float:
        """Control wavenumber on two-photon resonance."""
        return self.k_s_mag - self.omega_gs / self.c

    @classmethod
    def from_c_tilde(cls, c_tilde: float, L: float = 0.01, **kwargs) -> "PhysicalUnits":
        c = kwargs.pop("c", const.C_LIGHT)
        return cls(L=L, gamma=c / (c_tilde * L), c=c, **kwargs)


@dataclass(frozen=True)
class GridSpec:
    """Uniform 2D grid centred on the cloud.

    Cell ``(i, j)`` has its centre at ``(x[i], y[j])``. The time step is tied to
    the cell size so that light moves exactly one cell per step.
    """

    nx: int = 24
    ny: int = 24
    x_extent: float = 1.6
    y_extent: float = 1.6
    c_tilde: float = 850.0
    z_width: float = 0.2

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ParameterError("grid needs at least one cell per axis")
        for name in ("x_extent", "y_extent", "c_tilde", "z_width"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")

    @property
    def dx(self) -> float:
        return self.x_extent / self.nx

    @property
    def dy(self) -> float:
        return self.y_extent / self.ny

    @property
    def dt(self) -> float:
        return self.dx / self.c_tilde

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.x_extent + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y(self) -> np.ndarray:
        return -0.5 * self.y_extent + (np.arange(self.ny) + 0.5) * self.dy

    @property
    def z_factor(self) -> float:
        """Integral of ``exp(-2 z**2 / z_width**2)`` over z."""
        return self.z_width * math.sqrt(math.pi / 2.0)

    @property
    def weight(self) -> float:
        """Quadrature weight turning ``sum |f|**2`` into a 3D norm."""
        return self.dx * self.dy * self.z_factor

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def contains_cloud(self, radius: float = UNIT_SPHERE_RADIUS, margin: float = 0.0) -> bool:
        half = radius + margin
        return 0.5 * self.x_extent >= half and 0.5 * self.y_extent >= half

    def refined(self, factor: int = 2) -> "GridSpec":
        return replace(self, nx=self.nx * factor, ny=self.ny * factor)


@dataclass(frozen=True)
class DensityProfile:
    """Uniform sphere of unit volume; relative density 1 inside, 0 outside."""

    radius: float = UNIT_SPHERE_RADIUS
    value: float = 1.0
    supersample: int = 16

    def __call__(self, x, y, z=0.0):
        r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2 + np.asarray(z) ** 2
        return np.where(r2 <= self.radius**2, self.value, 0.0)

    def volume_integral(self) -> float:
        """Integral of the density over space, by quadrature over z-slices."""
        r = self.radius
        val, _ = integrate.quad(lambda z: math.pi * (r * r - z * z), -r, r, epsabs=1e-13)
        return self.value * val

    def cell_density(self, grid: GridSpec) -> np.ndarray:
        """Mean density of each cell in the ``z = 0`` plane (area-fraction weighted)."""
        m = self.supersample
        offs = (np.arange(m) + 0.5) / m - 0.5
        sx = (grid.x[:, None] + offs[None, :] * grid.dx).reshape(-1)
        sy = (grid.y[:, None] + offs[None, :] * grid.dy).reshape(-1)
        inside = (sx[:, None] ** 2 + sy[None, :] ** 2) <= self.radius**2
        frac = inside.reshape(grid.nx, m, grid.ny, m).mean(axis=(1, 3))
        return self.value * frac


@dataclass(frozen=True)
class SimParams:
    """All dimensionless constants of one simulation."""

    c_tilde: float
    g_tilde: float
    delta_tilde: float = 0.0
    grid: GridSpec = field(default_factory=GridSpec)
    density: DensityProfile = field(default_factory=DensityProfile)
    units: PhysicalUnits | None = None

    @property
    def d(self) -> float:
        return self.g_tilde**2 / self.c_tilde

    @property
    def d_prime(self) -> float:
        return DIAMETER_DEPTH_FACTOR * self.d

    def to_units(self) -> PhysicalUnits:
        base = self.units or PhysicalUnits()
        return PhysicalUnits(
            L=base.L,
            gamma=base.c / (self.c_tilde * base.L),
            c=base.c,
            k_s_mag=base.k_s_mag,
            omega_gs=base.omega_gs,
        )

    def with_depth(self, d: float) -> "SimParams":
        if d < 0:
            raise ParameterError("optical depth must be nonnegative")
        return replace(self, g_tilde=math.sqrt(d * self.c_tilde))


def make_params(
    units: PhysicalUnits | None = None,
    g_tilde: float = 0.0,
    delta_tilde: float = 0.0,
    grid: GridSpec | None = None,
    density: DensityProfile | None = None,
) -> SimParams:
    """Build :class:`SimParams` from SI units; the grid's time step follows ``c_tilde``."""
    units = units or PhysicalUnits()
    c_tilde = units.c_tilde
    if not (c_tilde > 0 and math.isfinite(c_tilde)):
        raise ParameterError(f"c_tilde must be positive, got {c_tilde!r}")
    if not g_tilde >= 0:
        raise ParameterError(f"g_tilde must be nonnegative, got {g_tilde!r}")
    grid = replace(grid or GridSpec(), c_tilde=c_tilde)
    return SimParams(
        c_tilde=c_tilde,
        g_tilde=float(g_tilde),
        delta_tilde=float(delta_tilde),
        grid=grid,
        density=density or DensityProfile(),
        units=units,
    )


def params_for_depth(d: float, c_tilde: float = 850.0, delta_tilde: float = 0.0,
                     grid: GridSpec | None = None, L: float = 0.01) -> SimParams:
    """Shortcut: system with optical depth ``d`` at the given ``c_tilde``."""
    if d < 0:
        raise ParameterError("optical depth must be nonnegative")
    units = PhysicalUnits.from_c_tilde(c_tilde, L=L)
    return make_params(units, math.sqrt(d * units.c_tilde), delta_tilde, grid)


def _check_depth(d_prime: float) -> None:
    if not d_prime >= 0:
        raise ValueError(f"optical depth must be nonnegative, got {d_prime!r}")


def eta_ref(d_prime: float) -> float:
    """Free-space reference efficiency ``(1 - 1/(1 + d'/2.9))**2``."""
    _check_depth(d_prime)
    if math.isinf(d_prime):
        return 1.0
    return (1.0 - 1.0 / (1.0 + d_prime / 2.9)) ** 2


def eta_cavity_max(d_prime: float) -> float:
    """Cavity-assisted bound ``(1 - 1/(1 + d'))**2``."""
    _check_depth(d_prime)
    if math.isinf(d_prime):
        return 1.0
    return (1.0 - 1.0 / (1.0 + d_prime)) ** 2


def signal_bandwidth(c_tilde: float, w_par: float) -> float:
    """Signal bandwidth in units of gamma for a pulse of dimensionless length ``w_par``."""
    if not w_par > 0:
        raise ValueError(f"w_par must be positive, got {w_par!r}")
    return c_tilde / w_par


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex amplitude sampled on a :class:`GridSpec` (array index ``[ix, iy]``)."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(f"field shape {values.shape} does not match grid "
                             f"({self.grid.nx}, {self.grid.ny})")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ComplexField":
        return cls(np.zeros((grid.nx, grid.ny), dtype=np.complex128), grid)

    def __mul__(self, other):
        return ComplexField(self.values * other, self.grid)

    __rmul__ = __mul__
