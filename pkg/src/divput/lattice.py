"""Binomial (CRR) pricing per segment on a full log-price lattice.

Every level of the lattice carries nodes ``X_j = K u^j`` over the whole price
range, so the slice at the segment start is available on a wide range of
prices, not just around one spot.  The two interleaved parities
of ``j`` are two ordinary CRR trees with shifted roots.
"""

from __future__ import annotations

import math
from typing import Callable, List, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import kernels
from .boundary import extraction_tolerance
from .dividends import compose_g
from .model import (DivPutError, DividendSchedule, MarketParams, OptionSpec,
                    PriceGrid, ValueSurface, put_payoff)
from .pde import segment_bounds


class DegenerateStep(DivPutError, ValueError):
    pass


def crr_parameters(dt: float, params: MarketParams):
    """``(up, p, discount)`` for one step; raises when ``e^{r dt}`` leaves ``(d, u)``."""
    up = math.exp(params.volatility * math.sqrt(dt))
    down = 1.0 / up
    growth = math.exp(params.rate * dt)
    if not down < growth < up:
        raise DegenerateStep(f"risk-neutral probability outside (0, 1) for dt={dt:g}")
    return up, (growth - down) / (up - down), 1.0 / growth


def lattice_to_grid(lattice_x: np.ndarray, lattice_v: np.ndarray, grid_x: np.ndarray,
                    strike: float) -> np.ndarray:
    """Monotone cubic transfer of lattice values to grid nodes.

    Below the lowest lattice price the value is joined linearly to ``u(0) = K``;
    above the highest it is held at the last lattice value.
    """
    xs = np.concatenate(([0.0], lattice_x))
    vs = np.concatenate(([strike], lattice_v))
    out = PchipInterpolator(xs, vs, extrapolate=False)(np.minimum(grid_x, xs[-1]))
    return out


def solve_segment_tree(terminal_payoff: Callable, t_lo: float, t_hi: float, steps: int,
                       spec: OptionSpec, params: MarketParams, grid: Optional[PriceGrid] = None,
                       n_slices: int = 400, american: bool = True, segment: int = 0,
                       x_floor: Optional[float] = None) -> ValueSurface:
    """Tree surface on ``[t_lo, t_hi]`` re-sampled onto ``grid`` at about ``n_slices`` times.

    Slices are denser near ``t_hi``: every level for the first ``steps // 20``
    levels, then evenly spaced.
    """
    if not t_lo < t_hi:
        raise ValueError("t_lo must be smaller than t_hi")
    if steps < 2:
        raise ValueError("need at least two steps")
    grid = grid or PriceGrid.build(spec.strike, spec.spot)
    K = spec.strike
    dt = (t_hi - t_lo) / steps
    up, p, disc = crr_parameters(dt, params)
    log_up = math.log(up)
    x_floor = x_floor if x_floor is not None else 1e-3 * K
    j_min = int(math.floor(math.log(x_floor / K) / log_up))
    j_max = int(math.ceil(math.log(1.05 * grid.x_max / K) / log_up))
    width = j_max - j_min + 1
    j_all = np.arange(j_min - steps, j_max + steps + 1)
    prices = K * np.exp(j_all * log_up)
    payoff = put_payoff(K)
    v = np.ascontiguousarray(terminal_payoff(prices), dtype=float)
    psi = payoff(prices) if american else np.full(prices.size, -np.inf)

    dense = min(steps, max(steps // 20, 1))
    stride = max(1, (steps - dense) // max(n_slices - dense, 1))
    rec = sorted(set(range(0, dense + 1)) | set(range(dense, steps + 1, stride)) | {steps})
    rec = np.asarray(rec, dtype=np.int64)
    snaps = kernels.tree_backward(v, psi, p, disc, steps, rec, steps, width, american)
    window_x = prices[steps:steps + width]
    values = np.array([lattice_to_grid(window_x, s, grid.nodes, K) for s in snaps])
    if american:
        # the cubic transfer can undershoot the kink of the payoff
        values = np.maximum(values, payoff(grid.nodes))
    times = t_hi - rec * dt
    times[-1] = t_lo
    # the terminal slice is the payoff itself, not its lattice transfer
    values[0] = np.asarray(terminal_payoff(grid.nodes), dtype=float)
    obst = np.broadcast_to(payoff(grid.nodes), values.shape)
    meta = {"engine": "tree", "strike": K, "steps": steps, "dt": dt,
            "psor_tol": 0.0, "backend": kernels.BACKEND}
    return ValueSurface(grid, times, values, segment, t_lo, t_hi, obst.copy(),
                        tolerance=extraction_tolerance(K), meta=meta)


def price_american_tree(spec: OptionSpec, params: MarketParams,
                        schedule: Optional[DividendSchedule] = None,
                        steps_per_segment: int = 2000, grid: Optional[PriceGrid] = None,
                        n_slices: int = 400, american: bool = True) -> List[ValueSurface]:
    """Segment recursion with the tree; one surface per segment, latest first."""
    schedule = schedule if schedule is not None else DividendSchedule()
    grid = grid or PriceGrid.build(spec.strike, spec.spot)
    terminal: Callable = put_payoff(spec.strike)
    surfaces = []
    for i, (t_lo, t_hi, event) in enumerate(segment_bounds(spec, schedule)):
        surf = solve_segment_tree(terminal, t_lo, t_hi, steps_per_segment, spec, params,
                                  grid=grid, n_slices=n_slices, american=american, segment=i)
        surf = surf.with_meta(terminal=terminal, end_event=event)
        surfaces.append(surf)
        if t_lo > 0:
            ev = schedule.events[schedule.count - 1 - i]
            terminal = compose_g(grid.nodes, surf.values[-1], spec.strike, ev.function,
                                 tolerance=surf.tolerance)
    return surfaces
