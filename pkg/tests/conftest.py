import numpy as np
import pytest

from qrouter.core import GridSpec, params_for_depth
from qrouter.pulses import ControlSpec, SignalSpec


@pytest.fixture
def small_params():
    """Coarse grid, good enough for structural checks."""
    return params_for_depth(6.0, grid=GridSpec(nx=16, ny=16))


@pytest.fixture
def signal():
    return SignalSpec()


@pytest.fixture
def good_control():
    # near-optimal absorption control at d = 6 on the default grid
    return ControlSpec(13.8, 64.6, 1.54, 0.0747, -0.0108)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from _acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
