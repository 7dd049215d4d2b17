"""Plain-text ``key = value`` run configuration.

Keys are grouped by dotted prefixes (``signal.w_par``); a ``[section]`` line
prefixes the keys below it. ``#`` starts a comment. Lists are comma
separated. Angles are given in degrees and converted to radians on access.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


SCENARIOS = ("absorb", "full", "sweep-abs", "sweep-phi", "mismatch-abs", "mismatch-em",
             "optimize", "feasibility", "coil", "adiabatic")

# key -> (kind, default); kind in float, int, str, bool, deg, floats, degs
SCHEMA: dict[str, tuple[str, object]] = {
    "scenario": ("str", None),
    "seed": ("int", 0),
    "system.c_tilde": ("float", 850.0),
    "system.d": ("float", 6.0),
    "system.g_tilde": ("float", None),
    "system.delta_tilde": ("float", 0.0),
    "grid.nx": ("int", 24),
    "grid.ny": ("int", 24),
    "grid.x_extent": ("float", 1.6),
    "grid.y_extent": ("float", 1.6),
    "grid.z_width": ("float", 0.2),
    "units.L": ("float", 0.01),
    "signal.w_par": ("float", 100.0),
    "signal.w_perp": ("float", 0.2),
    "signal.arrival_t": ("float", 0.0),
    "signal.k_mis": ("float", 0.0),
    "control.amplitude": ("float", 15.0),
    "control.w_par": ("float", 100.0),
    "control.w_perp": ("float", 1.0),
    "control.t0": ("float", 0.0),
    "control.x0": ("float", 0.0),
    "control.y0": ("float", 0.0),
    "control.theta": ("deg", 0.0),
    "emission.phi": ("deg", 0.0),
    "emission.k_mis": ("float", 0.0),
    "run.samples": ("int", 200),
    "optimize.enabled": ("bool", False),
    "optimize.objective": ("str", "abs"),
    "optimize.budget": ("int", 150),
    "optimize.n_sobol": ("int", 8),
    "sweep.d": ("floats", None),
    "sweep.theta": ("degs", [0.0]),
    "sweep.phi": ("degs", None),
    "sweep.k_mis": ("floats", None),
    "zeeman.gradient": ("float", 50.0),
    "zeeman.mu_diff_over_hbar": ("float", 17.6e6),
    "zeeman.t_rise": ("float", 5e-6),
    "feasibility.temps": ("floats", [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 300.0]),
    "feasibility.kappas": ("floats", [0.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7]),
    "coil.a": ("float", 0.01),
    "coil.G": ("float", 50.0),
    "coil.tau": ("float", 5e-6),
    "coil.N_c": ("int", 63),
    "coil.R": ("float", 0.0),
    "coil.I_max": ("float", None),
    "coil.V_max": ("float", None),
    "adiabatic.subspace": ("str", "H1"),
    "adiabatic.B0": ("float", 5000.0),
    "adiabatic.B1": ("float", 250.0),
    "adiabatic.tau": ("float", 1e-6),
    "adiabatic.taus": ("floats", None),
}

#: keys each scenario cannot run without
REQUIRED: dict[str, tuple[str, ...]] = {
    "sweep-abs": ("sweep.d",),
    "sweep-phi": ("sweep.phi",),
    "mismatch-abs": ("sweep.k_mis",),
    "mismatch-em": ("sweep.k_mis",),
}


def parse_text(text: str) -> dict[str, str]:
    """Raw ``key -> value`` strings; later lines override earlier ones."""
    out: dict[str, str] = {}
    prefix = ""
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            prefix = line[1:-1].strip()
            prefix = prefix + "." if prefix else ""
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"line {n}: empty key")
        out[prefix + k] = v
    return out


def _convert(key: str, kind: str, raw: str):
    try:
        if kind == "float" or kind == "deg":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind in ("floats", "degs"):
            return [float(x) for x in raw.split(",") if x.strip()]
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind}") from None


def _format(kind: str, value) -> str:
    if kind in ("floats", "degs"):
        return ", ".join(repr(float(v)) for v in value)
    if kind in ("float", "deg"):
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    return str(value)


@dataclass
class RunConfig:
    scenario: str
    values: dict = field(default_factory=dict)  # typed, angles still in degrees
    explicit: frozenset = frozenset()
    output: Path = Path("out")
    seed: int = 0

    def get(self, key: str):
        kind, _ = SCHEMA[key]
        v = self.values.get(key)
        if v is None:
            return None
        if kind == "deg":
            return math.radians(v)
        if kind == "degs":
            return [math.radians(x) for x in v]
        return v

    def has(self, key: str) -> bool:
        return self.values.get(key) is not None

    def echo(self) -> list[str]:
        """Every resolved key as config lines (sorted, unset keys omitted)."""
        lines = [f"scenario = {self.scenario}", f"seed = {self.seed}"]
        for key in sorted(SCHEMA):
            if key in ("scenario", "seed"):
                continue
            v = self.values.get(key)
            if v is not None:
                lines.append(f"{key} = {_format(SCHEMA[key][0], v)}")
        return lines


def build(raw: dict[str, str], scenario: str | None = None, output=None, seed: int | None = None,
          strict: bool = True) -> tuple[RunConfig, list[str]]:
    """Typed config from raw strings; returns the config and unknown-key messages."""
    problems = []
    values = {}
    for key, (kind, default) in SCHEMA.items():
        values[key] = default
    for key, rawv in raw.items():
        if key not in SCHEMA:
            problems.append(f"unknown key {key!r}")
            continue
        values[key] = _convert(key, SCHEMA[key][0], rawv)
    if problems and strict:
        raise ConfigError("; ".join(problems))
    scen = scenario or values.get("scenario")
    if scen is None:
        raise ConfigError("no scenario given")
    if scen not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scen!r}; expected one of {', '.join(SCENARIOS)}")
    values["scenario"] = scen
    if seed is not None:
        values["seed"] = seed
    cfg = RunConfig(scen, values, frozenset(raw), Path(output) if output is not None else Path("out"),
                    int(values["seed"]))
    return cfg, problems


def load(path, scenario: str | None = None, output=None, seed: int | None = None) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    cfg, _ = build(parse_text(text), scenario, output, seed)
    return cfg
