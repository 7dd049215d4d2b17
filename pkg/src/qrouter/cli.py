"""``router <scenario> --config <file> [--out <dir>] [--seed <n>]``

Exit status: 0 success, 2 configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, _accel
from . import config as cfgmod
from .config import ConfigError, RunConfig
from .core import GridSpec, PhysicalUnits, SimParams, UNIT_SPHERE_RADIUS, make_params, signal_bandwidth
from .pulses import ControlSpec, SignalSpec
from .solver import EmptySpinWaveError, GeometryError, ledger_total, write_series_csv

log = logging.getLogger("qrouter")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
#: bandwidth (units of gamma) above which a warning is issued
BANDWIDTH_WARN = 20.0


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    key: str
    message: str

    def __str__(self):
        return f"{self.level}: {self.key}: {self.message}"


# --- building blocks from a config ------------------------------------------

def system_params(cfg: RunConfig) -> SimParams:
    c_tilde = cfg.get("system.c_tilde")
    units = PhysicalUnits.from_c_tilde(c_tilde, L=cfg.get("units.L"))
    grid = GridSpec(nx=cfg.get("grid.nx"), ny=cfg.get("grid.ny"), x_extent=cfg.get("grid.x_extent"),
                    y_extent=cfg.get("grid.y_extent"), c_tilde=units.c_tilde, z_width=cfg.get("grid.z_width"))
    g = cfg.get("system.g_tilde")
    if g is None:
        d = cfg.get("system.d")
        if d < 0:
            raise ConfigError("system.d must be nonnegative")
        g = math.sqrt(d * units.c_tilde)
    return make_params(units, g, cfg.get("system.delta_tilde"), grid)


def signal_spec(cfg: RunConfig) -> SignalSpec:
    return SignalSpec(cfg.get("signal.w_par"), cfg.get("signal.w_perp"), cfg.get("signal.arrival_t"),
                      cfg.get("signal.k_mis"))


def control_spec(cfg: RunConfig) -> ControlSpec:
    return ControlSpec(cfg.get("control.amplitude"), cfg.get("control.w_par"), cfg.get("control.w_perp"),
                       cfg.get("control.t0"), cfg.get("control.x0"), cfg.get("control.y0"),
                       cfg.get("control.theta"))


def validate(cfg: RunConfig, unknown: list[str] | None = None) -> list[Diagnostic]:
    """Static checks; never runs a simulation."""
    out = [Diagnostic("error", m.split("'")[1] if "'" in m else "?", m) for m in (unknown or [])]
    for key in cfgmod.REQUIRED.get(cfg.scenario, ()):
        if not cfg.has(key):
            out.append(Diagnostic("error", key, f"required by scenario {cfg.scenario!r}"))
    try:
        p = system_params(cfg)
        sig = signal_spec(cfg)
        control_spec(cfg)
    except (ValueError, ConfigError) as exc:
        out.append(Diagnostic("error", "system", str(exc)))
        return out
    g = p.grid
    if not g.contains_cloud(p.density.radius, margin=0.5 * g.dx):
        out.append(Diagnostic("error", "grid", f"domain {g.x_extent}x{g.y_extent} does not hold the cloud "
                                              f"(radius {UNIT_SPHERE_RADIUS:.4f}) plus one cell"))
    if g.dt * g.c_tilde != g.dx:
        out.append(Diagnostic("error", "grid", "time step not locked to dx / c_tilde"))
    bw = signal_bandwidth(p.c_tilde, sig.w_par)
    if bw > BANDWIDTH_WARN:
        out.append(Diagnostic("warning", "signal.w_par",
                              f"signal bandwidth c_tilde/w_par = {bw:.4g} gamma exceeds {BANDWIDTH_WARN:g}; "
                              "expect reduced efficiency"))
    if sig.w_perp > 0.5 * g.y_extent:
        out.append(Diagnostic("warning", "signal.w_perp", "signal wider than the transverse domain"))
    if cfg.get("optimize.objective") not in ("abs", "full"):
        out.append(Diagnostic("error", "optimize.objective", "expected 'abs' or 'full'"))
    if cfg.get("adiabatic.subspace") not in ("H1", "H2", "H3"):
        out.append(Diagnostic("error", "adiabatic.subspace", "expected H1, H2 or H3"))
    return out


# --- csv helpers --------------------------------------------------------------

def _write_rows(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def _write_report(path: Path, items: dict) -> Path:
    return _write_rows(path, ["quantity", "value"], list(items.items()))


def write_field_csv(field, path: Path) -> Path:
    g = field.grid
    rows = []
    for i, x in enumerate(g.x):
        for j, y in enumerate(g.y):
            v = field.values[i, j]
            rows.append((float(x), float(y), float(v.real), float(v.imag)))
    return _write_rows(path, ["x_tilde", "y_tilde", "re", "im"], rows)


def _control_items(c: ControlSpec, prefix: str = "control") -> dict:
    return {f"{prefix}.amplitude": float(c.amplitude), f"{prefix}.w_par": float(c.w_par),
            f"{prefix}.w_perp": float(c.w_perp), f"{prefix}.t0": float(c.t0), f"{prefix}.x0": float(c.x0),
            f"{prefix}.y0": float(c.y0), f"{prefix}.theta_deg": math.degrees(c.theta)}


# --- scenarios ----------------------------------------------------------------

def _optimized(cfg: RunConfig, p, sig, ctrl, objective: str, phi: float = 0.0):
    from . import optimizer as opt

    base = ctrl
    fn = opt.absorption_objective(p, sig) if objective == "abs" else opt.full_objective(p, sig, phi)
    prob = opt.OptProblem(fn, opt.default_bounds(p, sig), base=base, budget=cfg.get("optimize.budget"),
                          seed=cfg.seed, initial=base, n_sobol=cfg.get("optimize.n_sobol"))
    return opt.optimize(prob)


def _maybe_optimize(cfg, p, sig, ctrl, objective, out: Path, phi: float = 0.0) -> ControlSpec:
    if not cfg.get("optimize.enabled"):
        return ctrl
    from .optimizer import write_trace_csv

    res = _optimized(cfg, p, sig, ctrl, objective, phi)
    write_trace_csv(res, out / "trace.csv")
    return res.best


def _scenario_absorb(cfg, out):
    from .solver import run_absorption

    p, sig = system_params(cfg), signal_spec(cfg)
    ctrl = _maybe_optimize(cfg, p, sig, control_spec(cfg), "abs", out)
    r = run_absorption(p, sig, ctrl, samples=cfg.get("run.samples"))
    write_series_csv(r.series, out / "series.csv")
    items = {"eta_abs": r.eta_abs, "ledger_max_dev": float(np.max(np.abs(ledger_total(r.series) - 1.0))),
             "window_start": r.window[0], "window_end": r.window[1], "d": p.d, "d_prime": p.d_prime}
    items.update(_control_items(ctrl))
    _write_report(out / "report.csv", items)
    for w in r.warnings:
        log.warning(w)


def _scenario_full(cfg, out):
    from .solver import run_absorption, run_emission, run_storage

    p, sig = system_params(cfg), signal_spec(cfg)
    phi = cfg.get("emission.phi")
    ctrl = _maybe_optimize(cfg, p, sig, control_spec(cfg), "full", out, phi)
    samples = cfg.get("run.samples")
    ab = run_absorption(p, sig, ctrl, samples=samples)
    st = run_storage(ab.state, p)
    em, snap = run_emission(st.S, p, ctrl, phi, k_mis=cfg.get("emission.k_mis"), samples=samples)
    write_series_csv(ab.series, out / "series_absorption.csv")
    write_series_csv(em.series, out / "series_emission.csv")
    write_field_csv(st.S, out / "spin_wave.csv")
    write_field_csv(snap, out / "emitted_field.csv")
    items = {"eta_abs": ab.eta_abs, "eta_em": em.eta_em, "eta_total": em.eta_total,
             "phi_deg": math.degrees(phi), "counting_end": em.meta["counting_end"], "d": p.d}
    items.update(_control_items(ctrl))
    _write_report(out / "report.csv", items)


def _scenario_sweep_abs(cfg, out):
    from .optimizer import sweep_eta_abs, write_sweep_csv

    p = system_params(cfg)
    rows = sweep_eta_abs(cfg.get("sweep.d"), cfg.get("sweep.theta"), signal_spec(cfg),
                         c_tilde=p.c_tilde, grid=p.grid, budget=cfg.get("optimize.budget"), seed=cfg.seed,
                         n_sobol=cfg.get("optimize.n_sobol"), initial=control_spec(cfg))
    write_sweep_csv(rows, out / "sweep_abs.csv")


def _scenario_sweep_phi(cfg, out):
    from .solver import run_full

    p, sig = system_params(cfg), signal_spec(cfg)
    ctrl = _maybe_optimize(cfg, p, sig, control_spec(cfg), "full", out, 0.0)
    rows = []
    for phi in cfg.get("sweep.phi"):
        r = run_full(p, sig, ctrl, phi=phi, samples=cfg.get("run.samples"))
        rows.append((math.degrees(phi), r.eta_abs, r.eta_em, r.eta_total,
                     float(np.max(np.abs(r.ledger() - 1.0)))))
    _write_rows(out / "sweep_phi.csv", ["phi_deg", "eta_abs", "eta_em", "eta", "ledger_max_dev"], rows)
    _write_report(out / "control.csv", _control_items(ctrl))


def _scenario_mismatch(cfg, out, stage: str):
    from .phasematch import (fit_gaussian_suppression, mismatch_sweep_absorption, mismatch_sweep_emission,
                             write_mismatch_csv)

    p, sig = system_params(cfg), signal_spec(cfg)
    ks = cfg.get("sweep.k_mis")
    if stage == "abs":
        ctrl = _maybe_optimize(cfg, p, sig, control_spec(cfg), "abs", out)
        eta = mismatch_sweep_absorption(p, sig, ctrl, ks)
        col, name = "k_mis_gamma_over_c", "mismatch_abs.csv"
    else:
        phi = cfg.get("emission.phi")
        ctrl = _maybe_optimize(cfg, p, sig, control_spec(cfg), "full", out, phi)
        eta = mismatch_sweep_emission(p, sig, ctrl, ks, phi)
        col, name = "k_mis_per_L", "mismatch_em.csv"
    fit = fit_gaussian_suppression(np.column_stack([ks, eta]))
    write_mismatch_csv(out / name, ks, eta, fit, k_column=col)
    _write_report(out / "control.csv", _control_items(ctrl))


def _scenario_optimize(cfg, out):
    from .optimizer import write_trace_csv

    p, sig = system_params(cfg), signal_spec(cfg)
    objective = cfg.get("optimize.objective")
    res = _optimized(cfg, p, sig, control_spec(cfg), objective, cfg.get("emission.phi"))
    write_trace_csv(res, out / "trace.csv")
    items = {"objective": objective, "best_value": res.best_value, "evaluations": res.evaluations_used}
    items.update(_control_items(res.best))
    _write_report(out / "optimize.csv", items)


def _zeeman_cfg(cfg):
    from .zeeman import ZeemanConfig

    return ZeemanConfig(cfg.get("zeeman.gradient"), cfg.get("zeeman.mu_diff_over_hbar"), cfg.get("zeeman.t_rise"))


def _scenario_feasibility(cfg, out):
    from .zeeman import feasibility_map, write_feasibility_csv

    cells = feasibility_map(cfg.get("feasibility.temps"), cfg.get("feasibility.kappas"), _zeeman_cfg(cfg))
    write_feasibility_csv(cells, out / "feasibility.csv")


def _scenario_coil(cfg, out):
    from .hardware import design_coil, write_coil_csv

    d = design_coil(cfg.get("coil.a"), cfg.get("coil.G"), cfg.get("coil.tau"), cfg.get("coil.N_c"),
                    R=cfg.get("coil.R"), I_max=cfg.get("coil.I_max"), V_max=cfg.get("coil.V_max"))
    write_coil_csv(d, out / "coil.csv")
    for n in d.notes:
        log.warning(n)


def _scenario_adiabatic(cfg, out):
    from .hardware import (hyperfine_bound_z, landau_zener_p, subspace_params, two_level_sweep,
                           write_sweep_csv)

    sub, B0, B1 = cfg.get("adiabatic.subspace"), cfg.get("adiabatic.B0"), cfg.get("adiabatic.B1")
    tau = cfg.get("adiabatic.tau")
    taus = cfg.get("adiabatic.taus") or [tau]
    rows = []
    for t in taus:
        tp = subspace_params(sub, B0, B1, t)
        res = two_level_sweep(tp)
        rows.append((t, tp.z, landau_zener_p(tp.v, tp.b), hyperfine_bound_z(B1, t), res.survival))
    _write_rows(out / "adiabatic.csv", ["tau_s", "z", "p_lz", "z_hyperfine_bound", "survival"], rows)
    tp = subspace_params(sub, B0, B1, tau)
    write_sweep_csv(two_level_sweep(tp), tp, out / "sweep_trace.csv")


_SCENARIOS = {
    "absorb": _scenario_absorb,
    "full": _scenario_full,
    "sweep-abs": _scenario_sweep_abs,
    "sweep-phi": _scenario_sweep_phi,
    "mismatch-abs": lambda c, o: _scenario_mismatch(c, o, "abs"),
    "mismatch-em": lambda c, o: _scenario_mismatch(c, o, "em"),
    "optimize": _scenario_optimize,
    "feasibility": _scenario_feasibility,
    "coil": _scenario_coil,
    "adiabatic": _scenario_adiabatic,
}


def write_manifest(cfg: RunConfig, out: Path) -> Path:
    meta = [
        f"# qrouter {__version__}",
        f"# backend {_accel.backend()}",
        f"# seed {cfg.seed}",
        f"# created {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}",
    ]
    path = out / "manifest.txt"
    path.write_text("\n".join(meta + cfg.echo()) + "\n")
    return path


def run(cfg: RunConfig) -> int:
    """Execute one scenario and write its CSVs and manifest into ``cfg.output``."""
    try:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(cfg, out)
        _SCENARIOS[cfg.scenario](cfg, out)
    except (ConfigError, OSError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (ArithmeticError, GeometryError, EmptySpinWaveError) as exc:
        log.error("numerical error: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("invalid parameter: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="router", description="Spin-wave light router simulations.")
    ap.add_argument("scenario", choices=cfgmod.SCENARIOS)
    ap.add_argument("--config", required=True, help="key = value configuration file")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--seed", type=int, default=None, help="optimizer seed (overrides config)")
    ap.add_argument("--check", action="store_true", help="only validate the configuration")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text()
        cfg, unknown = cfgmod.build(cfgmod.parse_text(text), args.scenario, args.out, args.seed, strict=False)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    diags = validate(cfg, unknown)
    for d in diags:
        print(d, file=sys.stderr)
    if any(d.level == "error" for d in diags):
        return EXIT_CONFIG
    if args.check:
        return EXIT_OK
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
