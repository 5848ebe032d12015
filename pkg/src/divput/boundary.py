"""Exercise-boundary extraction and the diagnostics built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .dividends import inf_ratio
from .model import (BoundaryCurve, DivPutError, DividendSchedule, MarketParams,
                    OptionSpec, ValueSurface, structural_flags)


class BoundaryAtZero(DivPutError, ValueError):
    pass


class InsufficientNodes(DivPutError, ValueError):
    pass


class EmptyWindow(DivPutError, ValueError):
    pass


def extraction_tolerance(strike: float, psor_tol: Optional[float] = None) -> float:
    psor_tol = 1e-9 * strike if psor_tol is None else psor_tol
    return max(1e-7 * strike, 10.0 * psor_tol)


def exercise_edge(x: np.ndarray, values: np.ndarray, obstacle: np.ndarray, eps: float) -> float:
    """Right end of the exercise interval ``[0, c]`` of one slice.

    Nodes with gap ``u - obstacle <= eps`` count as exercise.  Returns 0 when
    the first node is already in continuation and ``inf`` when no node is.
    Otherwise ``c`` is the zero of the secant through the first two
    continuation nodes, clipped to the cell between the last node where the
    solution sits on the obstacle and the first continuation node.
    """
    gap = np.asarray(values, dtype=float) - np.asarray(obstacle, dtype=float)
    cont = np.flatnonzero(gap > eps)
    if cont.size == 0:
        return math.inf
    j1 = int(cont[0])
    if j1 == 0:
        return 0.0
    on = np.flatnonzero(gap[:j1] <= 1e-3 * eps)
    lo = float(x[on[-1]]) if on.size else float(x[j1 - 1])
    hi = float(x[j1])
    if j1 + 1 < x.size and gap[j1 + 1] > gap[j1]:
        root = hi - gap[j1] * (x[j1 + 1] - hi) / (gap[j1 + 1] - gap[j1])
    else:
        root = hi
    return float(min(max(root, lo), hi))


def extract_boundary(surface: ValueSurface, spec: OptionSpec,
                     eps: Optional[float] = None) -> BoundaryCurve:
    """``c(t)`` for every time slice of ``surface`` (times as stored, decreasing)."""
    if eps is None:
        eps = extraction_tolerance(spec.strike, surface.meta.get("psor_tol"))
    x = surface.x
    levels = np.empty(surface.times.size)
    refined = np.zeros(surface.times.size, dtype=bool)
    for k in range(surface.times.size):
        c = exercise_edge(x, surface.values[k], surface.obstacle[k], eps)
        if math.isinf(c):
            c = spec.strike
        else:
            refined[k] = c > 0 and not np.any(x == c)
        levels[k] = c
    cells = surface.grid.cell_at(levels)
    return BoundaryCurve(surface.times.copy(), levels, eps, refined, cells)


def smooth_contact(surface: ValueSurface, curve: BoundaryCurve, t: float,
                   strike: Optional[float] = None) -> float:
    """Estimate ``d/dx u(t, c(t)+)`` from a quadratic through the three nodes above ``c(t)``."""
    k = surface.index_of(t)
    kc = int(np.argmin(np.abs(curve.times - surface.times[k])))
    c = float(curve.levels[kc])
    strike = float(strike if strike is not None else surface.meta.get("strike", 1.0))
    if c <= 0:
        raise BoundaryAtZero(f"boundary vanishes at t={t:g}")
    x = surface.x
    j = int(np.searchsorted(x, c, side="right"))
    idx = np.arange(j, j + 3)
    if idx[-1] >= x.size or x[idx[-1]] >= c + 0.1 * strike:
        raise InsufficientNodes(f"fewer than three nodes in (c, c + 0.1K) at t={t:g}")
    coef = np.polyfit(x[idx] - c, surface.values[k][idx], 2)
    return float(coef[1])


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    r2: float
    n: int


def default_window(t_d: float, t_lo: float, dt: float) -> Tuple[float, float]:
    return 2.0 * dt, 0.05 * (t_d - t_lo)


def asymptotic_slope(curve: BoundaryCurve, t_d: float,
                     window: Tuple[float, float]) -> SlopeFit:
    """Least-squares slope of ``c(t) = s (t_d - t)`` over ``t_d - t`` in the window."""
    lo, hi = window
    if not 0 <= lo < hi:
        raise EmptyWindow("window needs 0 <= delta_lo < delta_hi")
    delta = t_d - curve.times
    m = (delta >= lo) & (delta <= hi)
    if np.count_nonzero(m) < 2:
        raise EmptyWindow(f"fewer than two samples with t_d - t in [{lo:g}, {hi:g}]")
    d, c = delta[m], curve.levels[m]
    s = float(np.dot(d, c) / np.dot(d, d))
    ss_res = float(np.sum((c - s * d) ** 2))
    ss_tot = float(np.sum((c - c.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(s, r2, int(np.count_nonzero(m)))


def monotone_neighbourhood(curve: BoundaryCurve, t_d: float, tol: Optional[float] = None) -> float:
    """Earliest ``t`` such that ``c`` is non-increasing on ``[t, t_d)``.

    Increases up to ``tol`` are tolerated (default: the grid cell at each
    sample).  Returns ``t_d`` when there are no samples before ``t_d``.
    """
    asc = curve.ascending().window(-math.inf, t_d)
    t, c = asc.times, asc.levels
    if t.size == 0:
        return t_d
    tol = asc.cells if tol is None else np.full(t.size, float(tol))
    start = t.size - 1
    while start > 0 and c[start] - c[start - 1] <= tol[start]:
        start -= 1
    return float(t[start])


@dataclass
class BoundCheck:
    name: str
    passed: Optional[bool]
    margin: float
    detail: dict = field(default_factory=dict)


def _event_for(schedule: DividendSchedule, t_d: Optional[float]):
    if schedule.count == 0:
        raise ValueError("bound checks need at least one dividend")
    if t_d is None:
        return schedule.count - 1, schedule.events[-1]
    k = int(np.argmin([abs(e.date - t_d) for e in schedule.events]))
    return k, schedule.events[k]


def check_bounds(curve: BoundaryCurve, spec: OptionSpec, params: MarketParams,
                 schedule: DividendSchedule, t_d: Optional[float] = None,
                 c_bar_td: Optional[float] = None, slope_margin: float = 0.1,
                 dt: Optional[float] = None, t_lo: Optional[float] = None) -> List[BoundCheck]:
    """Evaluate the dividend-date bounds on the pre-dividend segment of ``curve``.

    ``curve`` may span several segments; only samples in ``[t_lo, t_d)`` are
    used, ``t_lo`` defaulting to the previous dividend date (or 0).
    """
    k, event = _event_for(schedule, t_d)
    t_d = event.date
    if t_lo is None:
        t_lo = schedule.events[k - 1].date if k > 0 else 0.0
    seg = curve.window(t_lo, t_d)
    K, r = spec.strike, params.rate
    delta = t_d - seg.times
    flags = structural_flags(event.function)
    fam = event.function.family
    out: List[BoundCheck] = []

    if fam in ("proportional", "identity"):
        rho = flags.rho
        bound = (1.0 - np.exp(-r * delta)) * K / (1.0 - rho)
        if fam == "identity":
            ok = seg.levels <= bound
        else:
            ok = seg.levels < bound
        out.append(BoundCheck("upper_bound_rho", bool(np.all(ok)), float(np.min(bound - seg.levels)),
                              {"rho": rho, "violations": int(np.count_nonzero(~ok))}))
    else:
        out.append(BoundCheck("upper_bound_rho", None, math.nan, {"reason": "g not convex"}))

    if flags.positive:
        mu = inf_ratio(event.function, check=False)
        step = dt if dt is not None else (float(np.min(np.diff(np.sort(seg.times)))) if seg.times.size > 1 else 0.0)
        lo, hi = default_window(t_d, t_lo, step)
        m = (delta >= lo) & (delta <= hi)
        lim = r * K * mu * delta[m] * (1.0 + slope_margin) + seg.cells[m]
        ok = seg.levels[m] <= lim
        out.append(BoundCheck("near_td_slope_bound", bool(np.all(ok)) if m.any() else None,
                              float(np.min(lim - seg.levels[m])) if m.any() else math.nan,
                              {"mu": mu, "window": [lo, hi]}))
    else:
        out.append(BoundCheck("near_td_slope_bound", None, math.nan, {"reason": "D not positive"}))

    if not flags.positive and math.isfinite(flags.d0) and flags.d0 > 0:
        if c_bar_td is None:
            raise ValueError("threshold check needs c_bar_td")
        m = delta <= 0.05 * (t_d - t_lo)
        top = float(np.max(seg.levels[m]))
        lim = min(flags.d0, c_bar_td) + float(np.max(seg.cells[m]))
        out.append(BoundCheck("limsup_threshold", top <= lim, lim - top,
                              {"d0": flags.d0, "c_bar_td": c_bar_td, "max_c": top}))
    else:
        out.append(BoundCheck("limsup_threshold", None, math.nan, {"reason": "not a threshold dividend"}))

    if flags.positive and flags.concave:
        start = monotone_neighbourhood(seg, t_d)
        n_in = int(np.count_nonzero(seg.times >= start))
        out.append(BoundCheck("monotone_near_td", n_in >= 5, t_d - start,
                              {"neighbourhood_start": start, "samples": n_in}))
    else:
        out.append(BoundCheck("monotone_near_td", None, math.nan, {"reason": "D not positive concave"}))
    return out
