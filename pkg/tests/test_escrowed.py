import math

import numpy as np
import pytest

from divput.escrowed import EscrowViolation, no_exercise_window, solve_escrowed
from divput.model import OptionSpec, PriceGrid, TimeStepping
from divput.pde import price_american_pde, surface_value


@pytest.fixture(scope="module")
def esc(params):
    spec = OptionSpec(100.0, 3.0)
    return solve_escrowed(spec, params, 5.0, 2.0, grid=PriceGrid.build(100.0, n_log=400),
                          stepping=TimeStepping(4 / 2920, 1.03, 0.02))


def test_window(params):
    spec = OptionSpec(100.0, 3.0)
    assert no_exercise_window(spec, 5.0, params) == pytest.approx(math.log(1.05) / 0.04)
    assert no_exercise_window(spec, 5.0, params) == pytest.approx(1.2198, abs=1e-4)
    assert no_exercise_window(spec, 0.0, params) == 0.0


def test_boundary_zero_inside_window(esc, params):
    c = esc.boundary()
    delta = 2.0 - c.times
    w = no_exercise_window(esc.spec, 5.0, params)
    assert np.all(c.levels[delta < w - 0.02] == 0)
    assert np.all(c.levels[delta > w + 0.02] > 0)


def test_after_dividend_is_plain_put(esc, params):
    plain = price_american_pde(OptionSpec(100.0, 3.0), params, grid=esc.after.grid,
                               stepping=TimeStepping(4 / 2920, 1.03, 0.02))
    for x in (80.0, 100.0):
        assert esc.value(2.5, x) == pytest.approx(surface_value(plain, 2.5, x), abs=1e-9)


def test_value_above_intrinsic(esc):
    for t in (0.0, 1.0, 1.9):
        assert esc.value(t, 90.0) >= 10.0 - 1e-9


def test_below_escrow_rejected(esc):
    with pytest.raises(EscrowViolation):
        esc.value(1.0, 1.0)
