"""Derivative-free tuning of the five control-pulse parameters.

Search runs in a normalized box ``[0, 1]**5``; the pulse widths are mapped
logarithmically. Starts are the supplied guess followed by a scrambled Sobol
sample of the box; each start is refined with bounded Nelder-Mead until the
evaluation budget is spent.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import optimize as sopt
from scipy.stats import qmc

from .core import SimParams
from .pulses import ControlSpec, SignalSpec
from .solver import EmptySpinWaveError, run_absorption, run_full

log = logging.getLogger(__name__)

PARAM_NAMES = ("amplitude", "w_par", "w_perp", "t0", "x0")
_LOG_PARAMS = ("w_par", "w_perp")


class OptimizationError(RuntimeError):
    pass


class _BudgetSpent(Exception):
    pass


def default_bounds(params: SimParams, signal: SignalSpec, t0_nominal: float = 0.0,
                   x0_nominal: float = 0.0) -> dict[str, tuple[float, float]]:
    """Amplitude up to 200, widths in [0.01, 300], t0 within two signal lengths
    (as time) of nominal, x0 within one cloud scale of nominal."""
    span_t = 2.0 * signal.w_par / params.c_tilde
    return {
        "amplitude": (0.0, 200.0),
        "w_par": (0.01, 300.0),
        "w_perp": (0.01, 300.0),
        "t0": (t0_nominal - span_t, t0_nominal + span_t),
        "x0": (x0_nominal - 1.0, x0_nominal + 1.0),
    }


def nominal_control(params: SimParams, signal: SignalSpec, theta: float = 0.0) -> ControlSpec:
    """Starting point: signal-sized control slightly delayed against the signal."""
    return ControlSpec(amplitude=15.0, w_par=signal.w_par, w_perp=1.0,
                       t0=signal.arrival_t + 0.1 * signal.w_par / params.c_tilde, theta=theta)


@dataclass
class OptProblem:
    objective: Callable[[ControlSpec], float]
    bounds: dict[str, tuple[float, float]]
    base: ControlSpec = field(default_factory=ControlSpec)
    budget: int = 150
    seed: int = 0
    initial: ControlSpec | None = None
    n_sobol: int = 8
    simplex_size: float = 0.08

    def __post_init__(self):
        for k in PARAM_NAMES:
            lo, hi = self.bounds[k]
            if not lo <= hi:
                raise ValueError(f"empty bounds for {k}")
            if k in _LOG_PARAMS and not lo > 0:
                raise ValueError(f"{k} bounds must be positive")
        if self.budget < len(PARAM_NAMES) + 1:
            raise ValueError("budget must allow at least one simplex")

    # box mapping
    def to_unit(self, spec: ControlSpec) -> np.ndarray:
        out = []
        for k in PARAM_NAMES:
            lo, hi = self.bounds[k]
            v = getattr(spec, k)
            if hi == lo:
                out.append(0.5)
            elif k in _LOG_PARAMS:
                out.append((math.log(v) - math.log(lo)) / (math.log(hi) - math.log(lo)))
            else:
                out.append((v - lo) / (hi - lo))
        return np.clip(np.array(out), 0.0, 1.0)

    def from_unit(self, u) -> ControlSpec:
        vals = {}
        for k, x in zip(PARAM_NAMES, np.clip(np.asarray(u, dtype=float), 0.0, 1.0)):
            lo, hi = self.bounds[k]
            if k in _LOG_PARAMS:
                vals[k] = math.exp(math.log(lo) + x * (math.log(hi) - math.log(lo)))
            else:
                vals[k] = lo + x * (hi - lo)
        return replace(self.base, **vals)


@dataclass
class OptResult:
    best: ControlSpec
    best_value: float
    trace: list[tuple[int, float]]
    evaluations_used: int
    starts: int = 0

    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(np.array([v for _, v in self.trace]))


def optimize(problem: OptProblem) -> OptResult:
    """Maximize ``problem.objective`` within ``problem.budget`` evaluations (deterministic)."""
    trace: list[tuple[int, float]] = []
    best = {"u": None, "value": -math.inf}
    cache: dict[bytes, float] = {}

    def evaluate(u) -> float:
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        key = u.tobytes()
        if key in cache:
            return cache[key]
        if len(trace) >= problem.budget:
            raise _BudgetSpent
        try:
            val = float(problem.objective(problem.from_unit(u)))
        except ArithmeticError as exc:  # blow-ups count as failed points
            log.warning("objective failed: %s", exc)
            val = math.nan
        trace.append((len(trace), val))
        cache[key] = val
        if math.isfinite(val) and val > best["value"]:
            best["u"], best["value"] = u.copy(), val
        return val

    def neg(u):
        v = evaluate(u)
        return -v if math.isfinite(v) else 1e300

    dim = len(PARAM_NAMES)
    starts = []
    if problem.initial is not None:
        starts.append(problem.to_unit(problem.initial))
    if problem.n_sobol > 0:
        sob = qmc.Sobol(d=dim, scramble=True, seed=problem.seed)
        m = int(math.ceil(math.log2(problem.n_sobol)))
        starts.extend(sob.random_base2(m)[: problem.n_sobol])

    # score every start once, then refine from the best ones in order
    scored = []
    try:
        for i, u in enumerate(starts):
            scored.append((evaluate(u), i))
    except _BudgetSpent:
        pass
    if not any(math.isfinite(v) for v, _ in scored):
        raise OptimizationError("objective not finite at any start point")
    # the supplied guess keeps priority on ties, otherwise descending value
    order = sorted((s for s in scored if math.isfinite(s[0])), key=lambda s: (-s[0], s[1]))
    n_local = 0
    try:
        for val, i in order:
            x0 = np.clip(starts[i], 0.0, 1.0)
            simplex = [x0]
            for j in range(dim):
                e = x0.copy()
                step = problem.simplex_size
                e[j] = e[j] + step if e[j] + step <= 1.0 else e[j] - step
                simplex.append(e)
            n_local += 1
            remaining = problem.budget - len(trace)
            if remaining <= dim:
                break
            sopt.minimize(neg, x0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * dim,
                          options={"initial_simplex": np.array(simplex), "maxfev": remaining,
                                   "xatol": 1e-4, "fatol": 1e-5})
    except _BudgetSpent:
        pass
    return OptResult(problem.from_unit(best["u"]), best["value"], trace, len(trace), n_local)


# --- objectives ---------------------------------------------------------------

def absorption_objective(params: SimParams, signal: SignalSpec, samples: int = 4,
                         use_numba: bool | None = None) -> Callable[[ControlSpec], float]:
    def f(ctrl: ControlSpec) -> float:
        return run_absorption(params, signal, ctrl, samples=samples, use_numba=use_numba).eta_abs
    return f


def full_objective(params: SimParams, signal: SignalSpec, phi: float = 0.0, samples: int = 4,
                   use_numba: bool | None = None) -> Callable[[ControlSpec], float]:
    def f(ctrl: ControlSpec) -> float:
        try:
            return run_full(params, signal, ctrl, phi=phi, samples=samples, use_numba=use_numba).eta_total
        except EmptySpinWaveError:  # nothing stored, nothing retrieved
            return 0.0
    return f


def optimize_absorption(params: SimParams, signal: SignalSpec, theta: float = 0.0, *,
                        budget: int = 150, seed: int = 0, initial: ControlSpec | None = None,
                        n_sobol: int = 8) -> OptResult:
    base = replace(initial or nominal_control(params, signal, theta), theta=theta)
    prob = OptProblem(absorption_objective(params, signal), default_bounds(params, signal),
                      base=base, budget=budget, seed=seed, initial=base, n_sobol=n_sobol)
    return optimize(prob)


def optimize_full(params: SimParams, signal: SignalSpec, theta: float = 0.0, phi: float = 0.0, *,
                  budget: int = 150, seed: int = 0, initial: ControlSpec | None = None,
                  n_sobol: int = 8) -> OptResult:
    base = replace(initial or nominal_control(params, signal, theta), theta=theta)
    prob = OptProblem(full_objective(params, signal, phi), default_bounds(params, signal),
                      base=base, budget=budget, seed=seed, initial=base, n_sobol=n_sobol)
    return optimize(prob)


# --- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    d: float
    angle: float
    eta: float
    control: ControlSpec
    evaluations: int


def sweep_eta_abs(depths, thetas, signal: SignalSpec | None = None, *, c_tilde: float = 850.0,
                  grid=None, budget: int = 150, seed: int = 0, n_sobol: int = 8,
                  initial: ControlSpec | None = None) -> list[SweepRow]:
    """Optimized absorption over a (d, theta) grid.

    Depths are walked in the given order for each theta; every point after the
    first starts from its predecessor's optimum.
    """
    from .core import params_for_depth

    signal = signal or SignalSpec()
    rows = []
    for th in thetas:
        guess = replace(initial, theta=th) if initial is not None else None
        for d in depths:
            p = params_for_depth(d, c_tilde=c_tilde, grid=grid)
            res = optimize_absorption(p, signal, th, budget=budget, seed=seed, initial=guess, n_sobol=n_sobol)
            rows.append(SweepRow(float(d), float(th), res.best_value, res.best, res.evaluations_used))
            guess = res.best
    return rows


def robustness_scan(objective: Callable[[ControlSpec], float], best: ControlSpec, parameter: str,
                    span: float = 0.2, n: int = 11, absolute: float | None = None):
    """Vary one parameter around ``best`` (others fixed); returns ``(values, eta)``.

    The range is ``value * (1 +- span)``, or ``value +- absolute`` when given.
    """
    if parameter not in PARAM_NAMES:
        raise ValueError(f"unknown parameter {parameter!r}")
    if n < 1:
        raise ValueError("need at least one sample")
    v0 = getattr(best, parameter)
    lo, hi = (v0 - absolute, v0 + absolute) if absolute is not None else (v0 * (1 - span), v0 * (1 + span))
    values = np.linspace(lo, hi, n) if n > 1 else np.array([v0])
    eta = np.array([objective(replace(best, **{parameter: float(v)})) for v in values])
    return values, eta


def write_sweep_csv(rows: list[SweepRow], path, angle_column: str = "theta_deg") -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", angle_column, "eta", *PARAM_NAMES, "evaluations"])
        for r in rows:
            w.writerow([repr(r.d), repr(math.degrees(r.angle)), repr(r.eta),
                        *[repr(float(getattr(r.control, k))) for k in PARAM_NAMES], r.evaluations])
    return path


def write_trace_csv(result: OptResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["evaluation", "value"])
        for i, v in result.trace:
            w.writerow([i, repr(v)])
    return path
