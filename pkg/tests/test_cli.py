import math
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from qrouter import cli
from qrouter import config as cfgmod
from qrouter.config import ConfigError


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_sections_and_comments():
    raw = cfgmod.parse_text("# top\nsystem.d = 6  # depth\n[signal]\nw_par = 50\n\n[]\nseed=3\n")
    assert raw == {"system.d": "6", "signal.w_par": "50", "seed": "3"}
    with pytest.raises(ConfigError):
        cfgmod.parse_text("just words")
    with pytest.raises(ConfigError):
        cfgmod.parse_text("= 3")


def test_typed_access_and_angles():
    cfg, unknown = cfgmod.build(cfgmod.parse_text("emission.phi = 90\nsweep.phi = 0, 180\n"
                                                  "optimize.enabled = yes\nfoo = 1"), "full", strict=False)
    assert cfg.get("emission.phi") == pytest.approx(math.pi / 2)
    assert cfg.get("sweep.phi") == pytest.approx([0.0, math.pi])
    assert cfg.get("optimize.enabled") is True
    assert unknown == ["unknown key 'foo'"]
    with pytest.raises(ConfigError):
        cfgmod.build({"foo": "1"}, "full")
    with pytest.raises(ConfigError):
        cfgmod.build({"grid.nx": "many"}, "full")
    with pytest.raises(ConfigError):
        cfgmod.build({}, "teleport")
    with pytest.raises(ConfigError):
        cfgmod.build({})


@given(st.floats(0.1, 100), st.integers(2, 64), st.floats(-180, 180), st.integers(0, 2**31))
def test_echo_round_trip(d, nx, phi, seed):
    raw = {"system.d": repr(d), "grid.nx": str(nx), "emission.phi": repr(phi)}
    cfg, _ = cfgmod.build(raw, "full", seed=seed)
    again, problems = cfgmod.build(cfgmod.parse_text("\n".join(cfg.echo())), None)
    assert problems == []
    assert again.values == cfg.values and again.scenario == "full" and again.seed == seed


def test_validate_reports_problems(tmp_path):
    cfg, unknown = cfgmod.build({"grid.x_extent": "1.0", "signal.w_par": "10", "bogus": "1"}, "sweep-abs",
                                strict=False)
    diags = cli.validate(cfg, unknown)
    keys = {(d.level, d.key) for d in diags}
    assert ("error", "grid") in keys
    assert ("error", "sweep.d") in keys
    assert ("error", "bogus") in keys
    assert ("warning", "signal.w_par") in keys


def test_validate_clean_default():
    cfg, _ = cfgmod.build({}, "absorb")
    assert cli.validate(cfg) == []


def test_main_config_errors(tmp_path, capsys):
    assert cli.main(["absorb", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG
    bad = _write(tmp_path, "bogus = 1\n")
    assert cli.main(["absorb", "--config", str(bad), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err
    need = _write(tmp_path, "system.d = 6\n", "n.cfg")
    assert cli.main(["mismatch-abs", "--config", str(need), "--check"]) == cli.EXIT_CONFIG
    assert cli.main(["absorb", "--config", str(need), "--check"]) == cli.EXIT_OK


def test_numerical_error_exit_code(tmp_path, monkeypatch):
    def boom(cfg, out):
        raise FloatingPointError("overflow")

    monkeypatch.setitem(cli._SCENARIOS, "coil", boom)
    c = _write(tmp_path, "coil.a = 0.01\n")
    assert cli.main(["coil", "--config", str(c), "--out", str(tmp_path / "o")]) == cli.EXIT_NUMERIC


def _run(tmp_path, scenario, text, out, seed=None):
    c = _write(tmp_path, text, f"{scenario}.cfg")
    argv = [scenario, "--config", str(c), "--out", str(out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    assert cli.main(argv) == cli.EXIT_OK
    return out


def test_coil_scenario(tmp_path):
    out = _run(tmp_path, "coil", "[coil]\na = 0.01\nG = 50\nN_c = 63\ntau = 5e-6\n", tmp_path / "o")
    header, row = (out / "coil.csv").read_text().splitlines()
    vals = dict(zip(header.split(","), row.split(",")))
    assert float(vals["N_c_I_A"]) == pytest.approx(62.2, abs=0.5)


def test_feasibility_and_adiabatic_scenarios(tmp_path):
    out = _run(tmp_path, "feasibility", "feasibility.temps = 1e-6, 300\nfeasibility.kappas = 0, 1e7\n",
               tmp_path / "f")
    assert len((out / "feasibility.csv").read_text().splitlines()) == 5
    out = _run(tmp_path, "adiabatic", "adiabatic.taus = 1e-9, 1e-8\nadiabatic.tau = 1e-9\n", tmp_path / "a")
    lines = (out / "adiabatic.csv").read_text().splitlines()
    assert lines[0] == "tau_s,z,p_lz,z_hyperfine_bound,survival"
    assert len(lines) == 3
    assert (out / "sweep_trace.csv").exists()


def test_manifest_feeds_back(tmp_path):
    out = _run(tmp_path, "coil", "coil.G = 40\n", tmp_path / "o", seed=11)
    text = (out / "manifest.txt").read_text()
    assert text.startswith("# qrouter ")
    cfg, problems = cfgmod.build(cfgmod.parse_text(text), None)
    assert problems == [] and cfg.scenario == "coil" and cfg.seed == 11 and cfg.get("coil.G") == 40.0
    out2 = _run(tmp_path, "coil", text, tmp_path / "o2")
    assert (out / "coil.csv").read_bytes() == (out2 / "coil.csv").read_bytes()


def test_absorb_and_full_outputs(tmp_path):
    base = "grid.nx = 12\ngrid.ny = 12\nrun.samples = 20\n"
    out = _run(tmp_path, "absorb", base, tmp_path / "a")
    rep = dict(line.split(",") for line in (out / "report.csv").read_text().splitlines()[1:])
    assert 0.0 < float(rep["eta_abs"]) < 1.0
    assert float(rep["ledger_max_dev"]) < 1e-6
    out = _run(tmp_path, "full", base + "emission.phi = 180\n", tmp_path / "f")
    for name in ("report.csv", "series_absorption.csv", "series_emission.csv", "spin_wave.csv",
                 "emitted_field.csv"):
        assert (out / name).stat().st_size > 0
