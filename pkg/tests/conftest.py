import numpy as np
import pytest

from divput.model import (DividendFunction, DividendSchedule, MarketParams, OptionSpec, PriceGrid,
                          validate_schedule)
from divput.pde import price_american_pde

K = 100.0


@pytest.fixture(scope="session")
def params():
    return MarketParams(0.04, 0.3)


@pytest.fixture(scope="session")
def spec1():
    return OptionSpec(K, 1.0, K)


@pytest.fixture(scope="session")
def grid400():
    return PriceGrid.build(K, K, n_log=400)


@pytest.fixture(scope="session")
def nodiv1(spec1, params, grid400):
    """No-dividend American put, T = 1, on the 400-node grid."""
    return price_american_pde(spec1, params, grid=grid400)


@pytest.fixture(scope="session")
def prop_half(spec1):
    return validate_schedule(DividendSchedule.of((0.5, DividendFunction.proportional(0.95))), spec1)


@pytest.fixture(scope="session")
def prop1(spec1, params, grid400, prop_half):
    """T = 1 with a 5% proportional dividend at 0.5."""
    return price_american_pde(spec1, params, prop_half, grid=grid400)


def pytest_configure(config):
    np.seterr(over="raise", invalid="ignore")


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = []
    for mod in list(sys.modules.values()):
        lines.extend(getattr(mod, "ACCEPTANCE_LINES", []) or [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines), key=lambda s: (int(s[2:4]), s)):
            terminalreporter.write_line(line)
