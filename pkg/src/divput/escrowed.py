"""Escrowed-dividend model for a single cash dividend.

The diffusing part is ``Y = S - D e^{-r (t_d - t)}`` before ``t_d``, so the
put becomes a no-dividend problem in ``y`` with a time-dependent obstacle
``(K - D e^{-r (t_d - s)} - y)^+`` up to ``t_d`` and the plain American put
afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .boundary import exercise_edge
from .model import (BoundaryCurve, DivPutError, MarketParams, OptionSpec, PriceGrid,
                    TimeStepping, ValueSurface)
from .pde import Steps, solve_segment_pde, surface_value


class EscrowViolation(DivPutError, ValueError):
    pass


def no_exercise_window(spec: OptionSpec, amount: float, params: MarketParams) -> float:
    """Length of the pre-dividend window on which early exercise is never optimal."""
    if amount < 0:
        raise ValueError("dividend must be non-negative")
    return math.log((spec.strike + amount) / spec.strike) / params.rate


@dataclass(frozen=True, eq=False)
class EscrowedSolution:
    spec: OptionSpec
    params: MarketParams
    amount: float
    t_d: float
    before: ValueSurface  # in y = x - D e^{-r (t_d - t)}, times in [0, t_d]
    after: ValueSurface   # in x, times in [t_d, T]

    def offset(self, t: float) -> float:
        return self.amount * math.exp(-self.params.rate * (self.t_d - t)) if t < self.t_d else 0.0

    def value(self, t: float, x: float) -> float:
        if not 0 <= t <= self.spec.maturity:
            raise ValueError("t outside [0, T]")
        surf = self.after if t >= self.t_d else self.before
        y = x - self.offset(t)
        if y < -1e-12 * max(1.0, x):
            raise EscrowViolation(f"x={x:g} below the escrowed dividend {self.offset(t):g} at t={t:g}")
        return float(surface_value([surf], t, max(y, 0.0)))

    def boundary(self) -> BoundaryCurve:
        """Exercise boundary in the original price ``x``; 0 where the region is empty."""
        s = self.before
        eps = s.tolerance
        lv = np.empty(s.times.size)
        for k, t in enumerate(s.times):
            c = exercise_edge(s.x, s.values[k], s.obstacle[k], eps)
            if math.isinf(c):
                c = s.x[-1]
            lv[k] = 0.0 if c == 0 else c + self.offset(t)
        cells = s.grid.cell_at(np.maximum(lv - np.array([self.offset(t) for t in s.times]), 0.0))
        return BoundaryCurve(s.times.copy(), lv, eps, lv > 0, cells)


def solve_escrowed(spec: OptionSpec, params: MarketParams, amount: float, t_d: float,
                   grid: Optional[PriceGrid] = None, stepping: Optional[Steps] = None) -> EscrowedSolution:
    if not 0 < t_d < spec.maturity:
        raise ValueError("dividend date must lie in (0, T)")
    if amount < 0:
        raise ValueError("dividend must be non-negative")
    grid = grid or PriceGrid.build(spec.strike, spec.spot)
    stepping = stepping if stepping is not None else TimeStepping()
    after = solve_segment_pde(lambda x: np.maximum(spec.strike - x, 0.0), t_d, spec.maturity,
                              grid, stepping, spec, params)
    base = PchipInterpolator(grid.nodes, after.values[-1], extrapolate=False)
    top = float(after.values[-1][-1])

    def terminal(y):
        y = np.asarray(y, dtype=float)
        return np.where(y > grid.x_max, top, base(np.minimum(y, grid.x_max)))

    K, r = spec.strike, params.rate

    def obstacle(t, y):
        return np.maximum(K - amount * math.exp(-r * (t_d - t)) - y, 0.0)

    before = solve_segment_pde(terminal, 0.0, t_d, grid, stepping, spec, params, obstacle=obstacle, segment=1)
    return EscrowedSolution(spec, params, float(amount), float(t_d), before, after)


def price_escrowed(spec: OptionSpec, params: MarketParams, amount: float, t_d: float, t: float,
                   x: float, grid: Optional[PriceGrid] = None, stepping: Optional[Steps] = None) -> float:
    return solve_escrowed(spec, params, amount, t_d, grid, stepping).value(t, x)
