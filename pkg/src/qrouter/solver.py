"""Split-step integrator for signal, polarisation and spin wave on the 2D grid.

The signal envelope is advected by an exact one-cell shift per step
(``dt = dx / c_tilde``); the light-atom coupling is a pointwise linear ODE
integrated with RK4 on either side of the shift. The incoming pulse is fed in
at the inflow face from its free-propagation form, so the domain only has to
hold the cloud. Photons not yet fed in are tracked as ``pending`` so that

    N_ph + N_e + N_s + loss + leaked + pending == 1

holds throughout an absorption run.
"""

from __future__ import annotations

import csv
import functools
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import kernels
from .core import ComplexField, DensityProfile, GridSpec, SimParams
from .pulses import ControlSpec, SignalSpec, signal_amplitude, signal_envelope, control_coordinates

log = logging.getLogger(__name__)

SERIES_COLUMNS = ("t_tilde", "N_ph", "N_e", "N_s", "loss", "leaked", "pending")
#: Pulses are cut this many e-widths away from their peak.
DEFAULT_TAIL = 3.5
#: Emission counting runs this many control passage times after arrival.
EMISSION_COUNT_FACTOR = 3.0


class NumericalBlowupError(ArithmeticError):
    """A field became NaN or infinite."""


class EmptySpinWaveError(ValueError):
    """Emission was requested from a spin wave holding no excitation."""


class GeometryError(ValueError):
    """Field support does not fit on the grid."""


@dataclass(frozen=True, eq=False)
class SimState:
    t: float
    E: ComplexField
    P: ComplexField
    S: ComplexField
    loss_accum: float = 0.0
    leaked_photons: float = 0.0
    pending_photons: float = 0.0

    @classmethod
    def vacuum(cls, grid: GridSpec, t: float = 0.0) -> "SimState":
        z = ComplexField.zeros(grid)
        return cls(t, z, ComplexField.zeros(grid), ComplexField.zeros(grid))


@dataclass
class EfficiencyReport:
    eta_abs: float
    eta_em: float
    eta_total: float
    series: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def ledger(self) -> np.ndarray:
        return ledger_total(self.series)

    def write_series(self, path: str | Path) -> Path:
        return write_series_csv(self.series, path)


@dataclass
class AbsorptionResult:
    state: SimState
    eta_abs: float
    series: dict[str, np.ndarray]
    window: tuple[float, float]
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        # allows ``state, eta_abs = run_absorption(...)``
        return iter((self.state, self.eta_abs))


def ledger_total(series: dict[str, np.ndarray]) -> np.ndarray:
    return sum(np.asarray(series[k]) for k in SERIES_COLUMNS[1:])


def write_series_csv(series: dict[str, np.ndarray], path: str | Path) -> Path:
    path = Path(path)
    cols = [np.asarray(series[k]) for k in SERIES_COLUMNS]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return path


# --- observables --------------------------------------------------------------

def photon_number(E: ComplexField) -> float:
    """Photon number of a signal envelope (z-direction integrated analytically)."""
    v = E.values
    return float(np.sum(v.real**2 + v.imag**2)) * E.grid.weight


def _atomic_number(F: ComplexField, dens: np.ndarray) -> float:
    v = F.values
    mask = dens > 0
    return float(np.sum((v.real[mask] ** 2 + v.imag[mask] ** 2) / dens[mask])) * F.grid.weight


def excitation_numbers(state: SimState, params: SimParams) -> tuple[float, float]:
    """``(N_e, N_s)``: excitations in the polarisation and in the spin wave."""
    dens = params.density.cell_density(params.grid)
    return _atomic_number(state.P, dens), _atomic_number(state.S, dens)


def spin_wave_number(S: ComplexField, density: DensityProfile | None = None) -> float:
    dens = (density or DensityProfile()).cell_density(S.grid)
    return _atomic_number(S, dens)


# --- engine -------------------------------------------------------------------

@functools.lru_cache(maxsize=32)
def _cloud(grid: GridSpec, density: DensityProfile):
    dens = density.cell_density(grid)
    ci, cj = np.nonzero(dens > 0)
    return dens, np.ascontiguousarray(ci, dtype=np.int64), np.ascontiguousarray(cj, dtype=np.int64), \
        np.ascontiguousarray(dens[ci, cj])


class _Engine:
    """Mutable working copy of one simulation."""

    def __init__(self, params: SimParams, control: ControlSpec, state: SimState,
                 decay: float = 1.0, use_numba: bool | None = None):
        grid = params.grid
        self.params = params
        self.grid = grid
        self.control = control
        self.decay = float(decay)
        self.use_numba = use_numba
        self.dens_grid, self.ci, self.cj, self.dens = _cloud(grid, params.density)
        x = grid.x[self.ci]
        y = grid.y[self.cj]
        upar, uperp = control_coordinates(control, x, y)
        self.upar = np.ascontiguousarray(upar, dtype=float)
        self.fperp = np.ascontiguousarray(control.amplitude * np.exp(-((uperp / control.w_perp) ** 2)))
        self.E = state.E.values.copy()
        self.P = state.P.values.copy()
        self.S = state.S.values.copy()
        self.loss_cells = np.zeros(self.ci.shape[0])
        self.loss0 = state.loss_accum
        self.leaked = np.array([state.leaked_photons])
        self.t = state.t
        self.steps = 0
        self.signal: SignalSpec | None = None
        self.across = np.zeros(grid.ny, dtype=np.complex128)
        self.xi_start = 0.0
        self.inj_steps0 = 0

    def set_signal(self, signal: SignalSpec):
        grid = self.grid
        self.signal = signal
        amp = signal_amplitude(signal, grid)
        self.across = np.ascontiguousarray(amp * np.exp(-((grid.y / signal.w_perp) ** 2)), dtype=np.complex128)
        self.xi_start = grid.x[0] - grid.c_tilde * (self.t - signal.arrival_t)
        self.inj_steps0 = self.steps

    def advance(self, n_steps: int, advect: bool = True):
        if n_steps <= 0:
            return
        grid = self.grid
        sig = self.signal
        inject = sig is not None
        # injection offset counts steps since the signal was attached
        xi = self.xi_start - (self.steps - self.inj_steps0) * grid.dx if inject else 0.0
        kernels.advance(
            self.E, self.P, self.S, self.loss_cells, self.leaked, self.dens, self.ci, self.cj,
            self.fperp, self.upar, self.across,
            int(n_steps), float(self.t), float(grid.dt), float(self.params.g_tilde), self.decay,
            float(self.params.delta_tilde), float(grid.c_tilde), float(self.control.w_par),
            float(self.control.t0), float(xi), float(grid.dx),
            float(sig.w_par) if inject else 1.0,
            float(sig.k_mis / grid.c_tilde) if inject else 0.0,
            bool(inject), bool(advect), float(grid.weight),
            use_numba=self.use_numba,
        )
        self.steps += n_steps
        self.t = self.t + n_steps * grid.dt
        if not (np.isfinite(self.E).all() and np.isfinite(self.P).all() and np.isfinite(self.S).all()):
            raise NumericalBlowupError(
                f"non-finite field between steps {self.steps - n_steps} and {self.steps} (t={self.t:.6g})")

    # observables
    def n_ph(self) -> float:
        v = self.E
        return float(np.sum(v.real**2 + v.imag**2)) * self.grid.weight

    def _n_atomic(self, F) -> float:
        v = F[self.ci, self.cj]
        return float(np.sum((v.real**2 + v.imag**2) / self.dens)) * self.grid.weight

    def n_e(self) -> float:
        return self._n_atomic(self.P)

    def n_s(self) -> float:
        return self._n_atomic(self.S)

    def loss(self) -> float:
        return self.loss0 + float(np.sum(self.loss_cells)) * self.grid.weight

    def pending(self) -> float:
        sig = self.signal
        if sig is None:
            return 0.0
        grid = self.grid
        xi_first = self.xi_start - (self.steps - self.inj_steps0) * grid.dx
        # lattice columns upstream of the inflow face
        span = 8.0 * sig.w_par
        n_up = int(max(0.0, (xi_first + span) / grid.dx)) + 1
        xi = xi_first - grid.dx * np.arange(1, n_up + 1)
        col = float(np.sum(np.abs(self.across) ** 2))
        return float(np.sum(np.exp(-2.0 * (xi / sig.w_par) ** 2))) * col * grid.weight

    def sample(self) -> tuple[float, ...]:
        return (self.t, self.n_ph(), self.n_e(), self.n_s(), self.loss(), float(self.leaked[0]), self.pending())

    def state(self) -> SimState:
        g = self.grid
        return SimState(self.t, ComplexField(self.E.copy(), g), ComplexField(self.P.copy(), g),
                        ComplexField(self.S.copy(), g), self.loss(), float(self.leaked[0]), self.pending())


def _series(rows) -> dict[str, np.ndarray]:
    arr = np.asarray(rows, dtype=float).reshape(-1, len(SERIES_COLUMNS))
    return {k: arr[:, i].copy() for i, k in enumerate(SERIES_COLUMNS)}


def step(state: SimState, params: SimParams, control: ControlSpec, *, inflow=None,
         advect: bool = True, decay: float = 1.0) -> SimState:
    """Advance ``state`` by one time step ``dt = dx / c_tilde``.

    ``inflow`` (length ``ny``) is written into the first column after the
    shift; vacuum is fed in otherwise. Pass ``advect=False`` to integrate only
    the local light-atom system (single-cell tests). ``decay=0`` switches off
    spontaneous emission.
    """
    eng = _Engine(params, control, state, decay=decay)
    eng.advance(1, advect=advect)
    if inflow is not None and advect:
        eng.E[0] = np.asarray(inflow, dtype=np.complex128)
    return eng.state()


# --- windows ------------------------------------------------------------------

def _control_passage(control: ControlSpec, params: SimParams, tail: float) -> tuple[float, float]:
    """Time the control crosses the cloud centre and its half passage duration."""
    c = params.c_tilde
    reach = tail * control.w_par + params.density.radius
    return control.crossing_time(c), reach / c


def absorption_window(params: SimParams, signal: SignalSpec, control: ControlSpec,
                      tail: float = DEFAULT_TAIL) -> tuple[float, float]:
    """Window from the signal's leading tail reaching the inflow face until both
    the signal and the control have left the cloud."""
    g = params.grid
    c = params.c_tilde
    x_lo, x_hi = -0.5 * g.x_extent, 0.5 * g.x_extent
    t_start = signal.arrival_t + (x_lo - tail * signal.w_par) / c
    t_sig_end = signal.arrival_t + (x_hi + tail * signal.w_par) / c
    tc, half = _control_passage(control, params, tail)
    return t_start, max(t_sig_end, tc + half)


def emission_window(params: SimParams, control: ControlSpec, tail: float = DEFAULT_TAIL,
                    count_factor: float = EMISSION_COUNT_FACTOR) -> tuple[float, float]:
    """Window from the control's leading tail reaching the cloud until
    ``count_factor`` passage times after its arrival."""
    tc, half = _control_passage(control, params, tail)
    return tc - half, tc + count_factor * half


def _n_steps(window, dt) -> int:
    t0, t1 = window
    return max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))


def _run_blocks(eng: _Engine, n_total: int, samples: int, stop=None):
    rows = [eng.sample()]
    block = max(1, int(math.ceil(n_total / max(1, samples))))
    done = 0
    while done < n_total:
        n = min(block, n_total - done)
        eng.advance(n)
        done += n
        rows.append(eng.sample())
        if stop is not None and stop(eng, rows[-1]):
            break
    return rows


# --- stages -------------------------------------------------------------------

def run_absorption(params: SimParams, signal: SignalSpec, control: ControlSpec, window=None, *,
                   samples: int = 200, decay: float = 1.0, tail: float = DEFAULT_TAIL,
                   use_numba: bool | None = None) -> AbsorptionResult:
    """Send the signal through the cloud while the control writes the spin wave.

    ``eta_abs`` is the spin-wave excitation number at the end of the window.
    """
    window = tuple(window) if window is not None else absorption_window(params, signal, control, tail)
    grid = params.grid
    start = SimState(window[0], signal_envelope(signal, grid, window[0]), ComplexField.zeros(grid),
                     ComplexField.zeros(grid))
    eng = _Engine(params, control, start, decay=decay, use_numba=use_numba)
    eng.set_signal(signal)
    rows = _run_blocks(eng, _n_steps(window, grid.dt), samples)
    state = eng.state()
    warnings = []
    peak_x = params.c_tilde * (state.t - signal.arrival_t)
    if peak_x < 0.5 * grid.x_extent:
        warnings.append(f"absorption window too short: signal peak at x={peak_x:.3g} still upstream "
                        "of the outflow face")
    for w in warnings:
        log.warning(w)
    return AbsorptionResult(state, eng.n_s(), _series(rows), (float(window[0]), float(state.t)), warnings)


def rotate_spin_wave(S: ComplexField, params: SimParams, phi: float) -> ComplexField:
    """Express the spin wave in axes rotated by ``phi`` (new +x along the emission direction).

    The unnormalized envelope ``S / n`` is resampled bilinearly, restricted to
    the cloud and rescaled so the excitation number is unchanged.
    """
    grid = S.grid
    dens = params.density.cell_density(grid)
    support = dens > 0
    if phi == 0.0:
        return ComplexField(S.values.copy(), grid)
    raw = np.zeros_like(S.values)
    raw[support] = S.values[support] / dens[support]
    X, Y = grid.mesh()
    c, s = math.cos(phi), math.sin(phi)
    xl = c * X - s * Y
    yl = s * X + c * Y
    fi = (xl - grid.x[0]) / grid.dx
    fj = (yl - grid.y[0]) / grid.dy
    src = np.abs(S.values) > 0
    if src.any():
        xs, ys = X[src], Y[src]
        # support of the rotated field must land inside the grid
        xr = c * xs + s * ys
        yr = -s * xs + c * ys
        if (np.abs(xr).max() > 0.5 * grid.x_extent - 0.5 * grid.dx or
                np.abs(yr).max() > 0.5 * grid.y_extent - 0.5 * grid.dy):
            raise GeometryError("rotated spin wave leaves the grid")
    coords = np.array([fi.ravel(), fj.ravel()])
    re = ndimage.map_coordinates(raw.real, coords, order=1, mode="constant", cval=0.0)
    im = ndimage.map_coordinates(raw.imag, coords, order=1, mode="constant", cval=0.0)
    out = ((re + 1j * im).reshape(raw.shape)) * dens
    out[~support] = 0.0
    before = _atomic_number(S, dens)
    after = _atomic_number(ComplexField(out, grid), dens)
    if after > 0:
        out *= math.sqrt(before / after)
    return ComplexField(out, grid)


def imprint_mismatch(S: ComplexField, k_mis: float) -> ComplexField:
    """Multiply by ``exp(i k_mis x)`` (``k_mis`` in units of 1/L, x along the emission axis)."""
    if k_mis == 0.0:
        return S
    return ComplexField(S.values * np.exp(1j * k_mis * S.grid.x)[:, None], S.grid)


def run_emission(stored: ComplexField, params: SimParams, control: ControlSpec, phi: float = 0.0,
                 window=None, *, k_mis: float = 0.0, samples: int = 200, decay: float = 1.0,
                 tail: float = DEFAULT_TAIL, count_factor: float = EMISSION_COUNT_FACTOR,
                 use_numba: bool | None = None) -> tuple[EfficiencyReport, ComplexField]:
    """Retrieve the stored spin wave with ``control`` towards angle ``phi``.

    ``control`` is given in the lab frame; the run happens in axes whose +x is
    the emission direction. ``k_mis`` (units 1/L) is imprinted along that axis.
    Returns the report and the signal snapshot at peak photon number.
    """
    dens = params.density.cell_density(params.grid)
    n_s0 = _atomic_number(stored, dens)
    if not n_s0 > 0:
        raise EmptySpinWaveError("stored spin wave holds no excitation")
    S = imprint_mismatch(rotate_spin_wave(stored, params, phi), k_mis)
    ctrl = control.in_frame(phi)
    window = tuple(window) if window is not None else emission_window(params, ctrl, tail, count_factor)
    grid = params.grid
    start = SimState(window[0], ComplexField.zeros(grid), ComplexField.zeros(grid), S)
    eng = _Engine(params, ctrl, start, decay=decay, use_numba=use_numba)
    tc, half = _control_passage(ctrl, params, tail)
    peak = {"n": -1.0, "E": np.zeros_like(eng.E)}

    def stop(e, row):
        if row[1] > peak["n"]:
            peak["n"] = row[1]
            peak["E"] = e.E.copy()
        return e.t > tc + half and row[1] + row[2] < 1e-12 * n_s0

    rows = _run_blocks(eng, _n_steps(window, grid.dt), samples, stop=stop)
    emitted = float(eng.leaked[0])
    eta_em = emitted / n_s0
    meta = {
        "phi": float(phi),
        "k_mis_per_L": float(k_mis),
        "emission_window": (float(window[0]), float(window[1])),
        "counting_end": float(eng.t),
        "control_frame_theta": float(ctrl.theta),
    }
    report = EfficiencyReport(n_s0, eta_em, n_s0 * eta_em, _series(rows), meta)
    return report, ComplexField(peak["E"], grid)


def run_storage(state: SimState, params: SimParams) -> SimState:
    """Hold the spin wave with the control off.

    The residual polarisation decays completely (added to the loss), residual
    signal leaves the cloud (added to the leaked photons); the spin wave is
    untouched.
    """
    n_e, _ = excitation_numbers(state, params)
    grid = params.grid
    return SimState(state.t, ComplexField.zeros(grid), ComplexField.zeros(grid), state.S,
                    state.loss_accum + n_e, state.leaked_photons + photon_number(state.E),
                    state.pending_photons)


def run_full(params: SimParams, signal: SignalSpec, control_abs: ControlSpec, *,
             phi: float = 0.0, ramp=None, control_em: ControlSpec | None = None,
             k_mis: float = 0.0, windows=(None, None), samples: int = 200,
             use_numba: bool | None = None) -> EfficiencyReport:
    """Absorption, storage with manipulation, and emission.

    With ``ramp`` (a :class:`~qrouter.phasematch.PhaseRamp`), the emission
    angle and residual mismatch follow from phase matching with the same
    control beam; otherwise the exact manipulation for ``phi`` is assumed.
    ``control_em`` defaults to the absorption control.
    """
    if ramp is not None:
        from .phasematch import emission_geometry

        units = params.to_units()
        phi, k_mis_phys = emission_geometry(ramp, control_abs.theta, units)
        k_mis = k_mis + k_mis_phys * units.L
    absorbed = run_absorption(params, signal, control_abs, windows[0], samples=samples, use_numba=use_numba)
    stored = run_storage(absorbed.state, params)
    em, _ = run_emission(stored.S, params, control_em or control_abs, phi, windows[1], k_mis=k_mis,
                         samples=samples, use_numba=use_numba)
    a = absorbed.series
    e = em.series
    t_shift = a["t_tilde"][-1] - e["t_tilde"][0]
    series = {
        "t_tilde": np.concatenate([a["t_tilde"], e["t_tilde"] + t_shift]),
        "N_ph": np.concatenate([a["N_ph"], e["N_ph"]]),
        "N_e": np.concatenate([a["N_e"], e["N_e"]]),
        "N_s": np.concatenate([a["N_s"], e["N_s"]]),
        "loss": np.concatenate([a["loss"], e["loss"] + stored.loss_accum]),
        "leaked": np.concatenate([a["leaked"], e["leaked"] + stored.leaked_photons]),
        "pending": np.concatenate([a["pending"], np.full_like(e["pending"], stored.pending_photons)]),
    }
    meta = dict(em.meta)
    meta.update(absorption_window=absorbed.window, warnings=list(absorbed.warnings))
    eta_abs = absorbed.eta_abs
    eta_em = em.eta_em
    return EfficiencyReport(eta_abs, eta_em, eta_abs * eta_em, series, meta)
