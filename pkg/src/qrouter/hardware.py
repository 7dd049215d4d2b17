"""Gradient-coil sizing and adiabaticity of the bias-field ramp.

The ramp is checked on the three two-level blocks of the rubidium-87 ground
manifold, each of the form ``H = hbar v sx + hbar (eps + b t) sz``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constants as const
from . import kernels

#: Maxwell-pair gradient efficiency prefactor, G = 0.64 mu0 N I / a**2.
MAXWELL_EFFICIENCY = 0.64
#: 1 T/m expressed in G/cm
_TESLA_PER_M_IN_G_PER_CM = 100.0
#: largest phase advance per integration step
MAX_PHASE_PER_STEP = 0.1


class ResolutionError(ValueError):
    """Too few steps to resolve the two-level dynamics."""


class DegenerateSweepError(ValueError):
    """Landau-Zener formula needs a nonzero sweep rate."""


# --- coil ---------------------------------------------------------------------

@dataclass(frozen=True)
class CoilDesign:
    a: float  # m
    N_c: int
    I: float  # A
    V_c: float  # V
    L_ind: float  # H
    G: float  # G/cm
    tau: float  # s
    efficiency_coeff: float  # G/cm per A
    R: float = 0.0  # ohm
    notes: tuple[str, ...] = ()

    @property
    def ampere_turns(self) -> float:
        return self.N_c * self.I

    @property
    def gradient_from_current(self) -> float:
        return self.efficiency_coeff * self.I

    @property
    def rise_time(self) -> float:
        return self.L_ind * self.I / (self.V_c - self.R * self.I)


def coil_efficiency(N_c: int, a: float) -> float:
    """Gradient per ampere in G/cm/A."""
    return MAXWELL_EFFICIENCY * const.MU_0 * N_c / a**2 * _TESLA_PER_M_IN_G_PER_CM


def coil_inductance(N_c: int, a: float) -> float:
    return math.pi * N_c**2 * a * const.MU_0


def ampere_turns(a: float, G: float) -> float:
    """``N_c I`` (A) needed for gradient ``G`` (G/cm) with coil radius ``a`` (m)."""
    return a**2 * (G / _TESLA_PER_M_IN_G_PER_CM) / (MAXWELL_EFFICIENCY * const.MU_0)


def design_coil(a: float, G_target: float, tau_target: float, N_c: int, *,
                R: float = 0.0, I_max: float | None = None, V_max: float | None = None) -> CoilDesign:
    """Current and voltage for a Maxwell pair reaching ``G_target`` within ``tau_target``.

    ``R`` adds the resistive drop ``R I`` to the voltage (excluded by default).
    Exceeding ``I_max`` or ``V_max`` is reported in ``notes``.
    """
    if not (a > 0 and tau_target > 0 and N_c > 0):
        raise ValueError("coil radius, rise time and winding count must be positive")
    if G_target < 0:
        raise ValueError("gradient must be nonnegative")
    eff = coil_efficiency(N_c, a)
    I = G_target / eff
    L_ind = coil_inductance(N_c, a)
    V = L_ind * I / tau_target + R * I
    notes = []
    if I_max is not None and I > I_max:
        notes.append(f"current {I:.4g} A exceeds supply limit {I_max:.4g} A")
    if V_max is not None and V > V_max:
        notes.append(f"voltage {V:.4g} V exceeds supply limit {V_max:.4g} V")
    return CoilDesign(a, int(N_c), I, V, L_ind, G_target, tau_target, eff, R, tuple(notes))


def write_coil_csv(design: CoilDesign, path) -> Path:
    path = Path(path)
    cols = ["a_m", "N_c", "I_A", "V_c_V", "L_ind_H", "G_G_per_cm", "tau_s", "efficiency_G_per_cm_per_A",
            "N_c_I_A"]
    vals = [design.a, design.N_c, design.I, design.V_c, design.L_ind, design.G, design.tau,
            design.efficiency_coeff, design.ampere_turns]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerow([v if isinstance(v, int) else repr(float(v)) for v in vals])
    return path


# --- Landau-Zener ------------------------------------------------------------

@dataclass(frozen=True)
class TwoLevelParams:
    v: float  # rad/s
    eps: float  # rad/s
    b: float  # rad/s^2
    subspace: str
    A_hfs: float = const.A_HFS_RB87
    B0: float = 0.0  # G
    B1: float = 0.0  # G
    g_S: float = const.G_S
    g_I: float = const.G_I_RB87
    tau: float = 1e-6

    @property
    def z(self) -> float:
        return landau_zener_z(self.v, self.b)


SUBSPACES = ("H1", "H2", "H3")


def subspace_params(subspace: str, B0: float, B1: float, tau: float, *,
                    A_hfs: float = const.A_HFS_RB87, g_S: float = const.G_S,
                    g_I: float = const.G_I_RB87) -> TwoLevelParams:
    """Two-level constants for one block; fields in gauss, ``B1`` reached linearly at ``t = tau``."""
    if subspace not in SUBSPACES:
        raise ValueError(f"unknown subspace {subspace!r}; expected one of {SUBSPACES}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    hb = const.HBAR
    zee = const.MU_BOHR * (g_S - g_I) / 2.0  # J/T
    b0 = B0 * const.GAUSS
    b1 = B1 * const.GAUSS
    if subspace == "H1":
        v = math.sqrt(3.0) / 2.0 * A_hfs
        eps = -A_hfs / 2.0 + zee * b0
        b = zee * b1 / tau
    elif subspace == "H2":
        v = A_hfs
        eps = -zee * b0
        b = -zee * b1 / tau
    else:
        v = math.sqrt(3.0) / 2.0 * A_hfs
        eps = A_hfs / 2.0 - zee * b0
        b = -zee * b1 / tau
    return TwoLevelParams(v / hb, eps / hb, b / hb, subspace, A_hfs, B0, B1, g_S, g_I, tau)


def landau_zener_z(v: float, b: float) -> float:
    if b == 0:
        raise DegenerateSweepError("sweep rate b must be nonzero")
    return v * v / abs(2.0 * b)


def landau_zener_p(v: float, b: float) -> float:
    """Diabatic transition probability ``exp(-pi z)``."""
    return math.exp(-math.pi * landau_zener_z(v, b))


def hyperfine_bound_z(B1: float, tau: float, *, A_hfs: float = const.A_HFS_RB87,
                      g_S: float = const.G_S, g_I: float = const.G_I_RB87) -> float:
    """The estimate ``A_hfs**2 / |2 hbar mu_B (g_S - g_I)/2 B1/tau|`` (full hyperfine constant as coupling)."""
    hb_b = const.MU_BOHR * (g_S - g_I) / 2.0 * B1 * const.GAUSS / tau
    return A_hfs**2 / abs(2.0 * const.HBAR * hb_b)


# --- numerical sweep ------------------------------------------------------------

def _eigvecs(v: float, w: float) -> np.ndarray:
    """Columns: eigenvectors of ``[[w, v], [v, -w]]`` for eigenvalues ``-r`` and ``+r``."""
    _, vec = np.linalg.eigh(np.array([[w, v], [v, -w]], dtype=float))
    return vec.astype(np.complex128)


@dataclass(frozen=True)
class SweepResult:
    survival: float
    trace: np.ndarray  # rows (t, re0, im0, re1, im1)
    max_norm_dev: float
    t_start: float
    t_end: float
    branch: int


def required_steps(params: TwoLevelParams, t_start: float, t_end: float) -> int:
    """Fewest steps keeping the phase advance per step at most ``MAX_PHASE_PER_STEP``."""
    w_max = max(abs(params.eps + params.b * t_start), abs(params.eps + params.b * t_end))
    om = math.hypot(params.v, w_max)
    return max(1, int(math.ceil(om * (t_end - t_start) / MAX_PHASE_PER_STEP)))


def crossing_window(params: TwoLevelParams, widths: float = 5.0) -> tuple[float, float]:
    """Interval ``widths`` crossing widths ``|v/b|`` around the avoided crossing."""
    if params.b == 0:
        raise DegenerateSweepError("no crossing without a sweep")
    tc = -params.eps / params.b
    half = widths * abs(params.v / params.b)
    return tc - half, tc + half


def two_level_sweep(params: TwoLevelParams, steps: int | None = None, *, window=None,
                    trace_points: int = 200, use_numba: bool | None = None) -> SweepResult:
    """Evolve the adiabatic state connected to ``(1, 0)`` and return its final population.

    The default window is ``[0, tau]``. The initial state is the eigenvector of
    ``H(t_start)`` with the larger weight on the first basis state (the upper
    branch on a tie); survival is the overlap with the same branch at the end.
    """
    t0, t1 = (0.0, params.tau) if window is None else (float(window[0]), float(window[1]))
    need = required_steps(params, t0, t1)
    if steps is None:
        steps = need
    elif steps < need:
        raise ResolutionError(f"{steps} steps give more than {MAX_PHASE_PER_STEP} rad per step; "
                              f"need at least {need}")
    w0 = params.eps + params.b * t0
    w1 = params.eps + params.b * t1
    vec0 = _eigvecs(params.v, w0)
    weights = np.abs(vec0[0]) ** 2
    branch = 1 if weights[1] >= weights[0] - 1e-15 else 0
    psi = np.ascontiguousarray(vec0[:, branch])
    if params.b == 0 and params.v == 0 and w0 == 0:
        psi = np.array([1.0 + 0j, 0.0 + 0j])
    dt = (t1 - t0) / steps
    stride = max(1, steps // max(1, trace_points))
    trace = np.zeros((steps // stride, 5))
    dev = kernels.sweep(params.v, params.eps, params.b, t0, dt, steps, psi, stride, trace,
                        use_numba=use_numba)
    vec1 = _eigvecs(params.v, w1)
    target = vec1[:, branch]
    if params.b == 0 and params.v == 0 and w0 == 0:
        target = np.array([1.0 + 0j, 0.0 + 0j])
    survival = float(abs(np.vdot(target, psi)) ** 2)
    return SweepResult(survival, trace, dev, t0, t1, branch)


def write_sweep_csv(result: SweepResult, params: TwoLevelParams, path) -> Path:
    """Trace rows with the instantaneous survival on the tracked branch."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "re0", "im0", "re1", "im1", "survival"])
        for t, r0, i0, r1, i1 in result.trace:
            vec = _eigvecs(params.v, params.eps + params.b * t)[:, result.branch]
            s = abs(np.vdot(vec, np.array([r0 + 1j * i0, r1 + 1j * i1]))) ** 2
            w.writerow([repr(float(x)) for x in (t, r0, i0, r1, i1, s)])
    return path
