"""American put options on assets with discrete, price-dependent dividends."""

from .boundary import extract_boundary
from .closed_forms import european_put, perpetual_boundary, perpetual_put
from .config import Scenario, bundled, load_scenario, scenario_from_dict
from .escrowed import solve_escrowed
from .kernels import BACKEND
from .lattice import price_american_tree
from .model import (BoundaryCurve, DividendFunction, DividendSchedule, MarketParams, OptionSpec,
                    PriceGrid, TimeStepping, ValueSurface, validate_schedule)
from .montecarlo import price_ls
from .pde import price_american_pde, surface_value
from .suite import CheckReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BoundaryCurve", "CheckReport", "DividendFunction", "DividendSchedule",
    "MarketParams", "OptionSpec", "PriceGrid", "Scenario", "TimeStepping", "ValueSurface",
    "bundled", "european_put", "extract_boundary", "load_scenario", "perpetual_boundary",
    "perpetual_put", "price_american_pde", "price_american_tree", "price_ls", "run_suite",
    "scenario_from_dict", "solve_escrowed", "surface_value", "validate_schedule",
]
