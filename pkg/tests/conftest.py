"""Shared device/pulse builders for the test suite.

Everything is phrased in MHz (linear frequency) and converted once,
since that is how operating points are quoted; the three bundled
reference rows double as realistic fixtures for most modules.
"""

import math

import pytest

from craswitch.model import DeviceParams
from craswitch.pulse import Pulse

TWO_PI = 2.0 * math.pi

# one line per acceptance criterion, replayed after the run summary
# (pytest's fd capture would otherwise swallow mid-run reporting)
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# (J, kappa, g_ef) in MHz and tau_p in us for the bundled reference rows
TABLE_ROWS = (
    {"j": 20.0, "kappa": 45.0, "g_ef": 50.0, "tau_p": 0.06},
    {"j": 12.0, "kappa": 28.0, "g_ef": 40.0, "tau_p": 0.30},
    {"j": 10.5, "kappa": 24.0, "g_ef": 30.0, "tau_p": 0.60},
)


def make_point(j=12.0, kappa=28.0, g_ef=40.0, tau_p=0.3, *, n_res=7,
               omega_r=7000.0, omega_ge=7360.0, omega_0=None,
               kappa_1=None, kappa_2=None, g_ge=None,
               **extra) -> tuple[DeviceParams, Pulse]:
    """Device + pulse from MHz-valued arguments (kappa_1/2 default to kappa)."""
    p = DeviceParams(
        omega_r=TWO_PI * omega_r,
        omega_ge=TWO_PI * omega_ge,
        g_ef=TWO_PI * g_ef,
        J=TWO_PI * j,
        kappa_1=TWO_PI * (kappa if kappa_1 is None else kappa_1),
        kappa_2=TWO_PI * (kappa if kappa_2 is None else kappa_2),
        n_res=n_res,
        g_ge=None if g_ge is None else TWO_PI * g_ge,
        **extra,
    )
    pulse = Pulse(
        omega_0=TWO_PI * (omega_r if omega_0 is None else omega_0),
        tau_p=tau_p,
    )
    return p, pulse


def table_point(row_index: int, **overrides) -> tuple[DeviceParams, Pulse]:
    """One of the bundled reference rows as a (device, pulse) pair."""
    kwargs = dict(TABLE_ROWS[row_index])
    kwargs.update(overrides)
    return make_point(**kwargs)


@pytest.fixture
def row2():
    """The middle reference row — moderate rates, cheap to integrate."""
    return table_point(1)
