"""Domain types shared by every engine: market data, dividends, grids, surfaces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np


class DivPutError(Exception):
    """Base class for all library errors."""


class ScheduleError(DivPutError, ValueError):
    pass


class DateOutOfRange(ScheduleError):
    pass


class DatesNotDistinct(ScheduleError):
    pass


class MonotonicityViolation(ScheduleError):
    def __init__(self, x: float, message: str = ""):
        self.x = float(x)
        super().__init__(message or f"dividend function violates monotonicity near x={x:.6g}")


@dataclass(frozen=True)
class MarketParams:
    rate: float
    volatility: float

    def __post_init__(self):
        if not (self.rate > 0 and self.volatility > 0):
            raise ValueError("rate and volatility must both be positive")


@dataclass(frozen=True)
class OptionSpec:
    strike: float
    maturity: float
    spot: float = 0.0

    def __post_init__(self):
        if not self.strike > 0:
            raise ValueError("strike must be positive")
        if not self.maturity > 0:
            raise ValueError("maturity must be positive")
        if self.spot < 0:
            raise ValueError("spot must be non-negative")


_FAMILY_PARAMS = {
    "proportional": ("rho",),
    "constant": ("amount",),
    "mixed": ("a", "b", "c"),
    "identity": (),
    "threshold": ("b", "d0"),
}


@dataclass(frozen=True)
class DividendFunction:
    """One of the five supported dividend maps ``x -> D(x)``.

    Build instances with the family constructors (:meth:`proportional`,
    :meth:`constant`, :meth:`mixed`, :meth:`identity`, :meth:`threshold`).
    Evaluation is vectorised over numpy arrays.
    """

    family: str
    values: tuple = ()

    def __post_init__(self):
        names = _FAMILY_PARAMS.get(self.family)
        if names is None:
            raise ValueError(f"unknown dividend family {self.family!r}")
        if len(self.values) != len(names):
            raise ValueError(f"{self.family} expects parameters {names}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        p = self.params
        if self.family == "proportional" and not 0 < p["rho"] < 1:
            raise ValueError("proportional dividend needs rho in (0, 1)")
        if self.family == "constant" and not p["amount"] > 0:
            raise ValueError("constant dividend needs a positive amount")
        if self.family == "mixed":
            if min(p["a"], p["b"], p["c"]) < 0 or p["c"] > 1:
                raise ValueError("mixed dividend needs a, b, c >= 0 and c <= 1")
        if self.family == "threshold":
            if not 0 < p["b"] <= 1 or not p["d0"] > 0:
                raise ValueError("threshold dividend needs b in (0, 1] and d0 > 0")

    @classmethod
    def proportional(cls, rho: float) -> "DividendFunction":
        """``D(x) = (1 - rho) x``; rho is the fraction of the price retained."""
        return cls("proportional", (rho,))

    @classmethod
    def from_fraction(cls, fraction: float) -> "DividendFunction":
        """Proportional dividend paying ``fraction`` of the cum-dividend price."""
        return cls("proportional", (1.0 - fraction,))

    @classmethod
    def constant(cls, amount: float) -> "DividendFunction":
        return cls("constant", (amount,))

    @classmethod
    def mixed(cls, a: float, b: float, c: float) -> "DividendFunction":
        return cls("mixed", (a, b, c))

    @classmethod
    def identity(cls) -> "DividendFunction":
        return cls("identity", ())

    @classmethod
    def threshold(cls, b: float, d0: float) -> "DividendFunction":
        return cls("threshold", (b, d0))

    @property
    def params(self) -> dict:
        return dict(zip(_FAMILY_PARAMS[self.family], self.values))

    def __call__(self, x):
        from .dividends import eval_dividend

        return eval_dividend(self, x)

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family}({inner})"


@dataclass(frozen=True)
class StructuralFlags:
    concave: bool
    positive: bool
    d0: float
    # D(x) = slope * x on (0, radius); None when D is not linear near zero
    near_zero_slope: Optional[float]
    near_zero_radius: Optional[float]

    @property
    def linear_near_zero(self) -> bool:
        return self.near_zero_slope is not None

    @property
    def rho(self) -> Optional[float]:
        """Retained fraction ``1 - slope`` of the linear piece near zero."""
        if self.near_zero_slope is None:
            return None
        return 1.0 - self.near_zero_slope


@dataclass(frozen=True)
class DividendEvent:
    date: float
    function: DividendFunction


@dataclass(frozen=True)
class DividendSchedule:
    """Dividend events stored in ascending date order.

    Dividend numbering runs the other way: ``events[-1]`` is the latest
    date (index 1) and ``events[0]`` the earliest (index I).
    """

    events: tuple = ()
    flags: Optional[tuple] = None

    def __post_init__(self):
        evs = tuple(sorted(self.events, key=lambda e: e.date))
        object.__setattr__(self, "events", evs)

    @classmethod
    def of(cls, *pairs) -> "DividendSchedule":
        return cls(tuple(DividendEvent(float(d), f) for d, f in pairs))

    @property
    def count(self) -> int:
        return len(self.events)

    @property
    def dates(self) -> tuple:
        return tuple(e.date for e in self.events)

    def latest_first(self) -> tuple:
        return tuple(reversed(self.events))

    def drop_earliest(self) -> "DividendSchedule":
        """Schedule without its earliest event (the problem with one fewer dividend)."""
        flags = self.flags[1:] if self.flags is not None else None
        return DividendSchedule(self.events[1:], flags)

    @property
    def validated(self) -> bool:
        return self.flags is not None


def structural_flags(df: DividendFunction) -> StructuralFlags:
    p = df.params
    inf = math.inf
    if df.family == "proportional":
        return StructuralFlags(True, True, 0.0, 1.0 - p["rho"], inf)
    if df.family == "constant":
        return StructuralFlags(True, True, 0.0, 1.0, p["amount"])
    if df.family == "identity":
        return StructuralFlags(True, True, 0.0, 1.0, inf)
    if df.family == "threshold":
        return StructuralFlags(False, False, p["d0"], None, None)
    a, b, c = p["a"], p["b"], p["c"]
    positive = c > 0 and (a > 0 or b > 0)
    if not positive:
        return StructuralFlags(True, False, inf if c == 0 or (a == 0 and b == 0) else 0.0, None, None)
    if a == 0:
        return StructuralFlags(True, True, 0.0, min(b, c), inf)
    radius = a / (c - b) if c > b else inf
    return StructuralFlags(True, True, 0.0, c, radius)


def validate_schedule(schedule: DividendSchedule, spec: OptionSpec,
                      n_samples: int = 10_000) -> DividendSchedule:
    """Check dates and sampled monotonicity; return the schedule with flags attached."""
    dates = schedule.dates
    for d in dates:
        if not 0 < d < spec.maturity:
            raise DateOutOfRange(f"dividend date {d} outside (0, {spec.maturity})")
    if len(set(dates)) != len(dates):
        raise DatesNotDistinct(f"dividend dates are not distinct: {dates}")
    xs = np.concatenate(([0.0], np.geomspace(1e-4 * spec.strike, 1e2 * spec.strike, n_samples)))
    flags = []
    for ev in schedule.events:
        d = np.asarray(ev.function(xs), dtype=float)
        ex = xs - d
        tol = 1e-12 * np.maximum(1.0, xs)
        bad = np.flatnonzero(d < -tol[0])
        if bad.size:
            raise MonotonicityViolation(xs[bad[0]], f"D(x) < 0 at x={xs[bad[0]]:.6g}")
        for arr, what in ((d, "D"), (ex, "x - D(x)")):
            bad = np.flatnonzero(np.diff(arr) < -tol[1:])
            if bad.size:
                x = xs[bad[0] + 1]
                raise MonotonicityViolation(x, f"{what} decreases near x={x:.6g}")
        bad = np.flatnonzero(ex < -tol)
        if bad.size:
            raise MonotonicityViolation(xs[bad[0]], f"x - D(x) < 0 at x={xs[bad[0]]:.6g}")
        flags.append(structural_flags(ev.function))
    return DividendSchedule(schedule.events, tuple(flags))


@dataclass(frozen=True, eq=False)
class PriceGrid:
    """Price nodes: a uniform patch on ``[0, x_min_log]`` then log-uniform to ``x_max``."""

    nodes: np.ndarray
    x_min_log: float = 0.0

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 4:
            raise ValueError("grid needs at least four nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if nodes[0] < 0:
            raise ValueError("grid nodes must be non-negative")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def build(cls, strike: float, spot: float = 0.0, n_log: int = 1200,
              n_linear: Optional[int] = None, x_min_log: Optional[float] = None,
              x_max: Optional[float] = None) -> "PriceGrid":
        x_min_log = strike / 100.0 if x_min_log is None else x_min_log
        x_max = max(4.0 * strike, 4.0 * spot) if x_max is None else x_max
        if x_max < 4.0 * strike:
            raise ValueError("x_max must be at least 4 K")
        log_nodes = np.exp(np.linspace(math.log(x_min_log), math.log(x_max), n_log))
        if n_linear is None:
            # match the log spacing at the junction
            h_log = math.log(x_max / x_min_log) / (n_log - 1)
            n_linear = max(2, int(round(1.0 / h_log)))
        lin = np.linspace(0.0, x_min_log, n_linear + 1)[:-1]
        return cls(np.concatenate((lin, log_nodes)), x_min_log)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def x_max(self) -> float:
        return float(self.nodes[-1])

    def cell_at(self, x) -> np.ndarray:
        """Width of the grid cell containing ``x`` (clipped to the grid)."""
        idx = np.clip(np.searchsorted(self.nodes, x, side="right"), 1, self.size - 1)
        return self.nodes[idx] - self.nodes[idx - 1]


@dataclass(frozen=True)
class TimeStepping:
    """Backward time steps: ``dt_min`` at a segment end, growing geometrically to ``dt_max``."""

    dt_min: float = 1.0 / (8 * 365)
    growth: float = 1.03
    dt_max: float = 0.005

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_max and self.growth >= 1.0):
            raise ValueError("need 0 < dt_min <= dt_max and growth >= 1")

    def times(self, t_lo: float, t_hi: float) -> np.ndarray:
        """Time nodes from ``t_hi`` down to ``t_lo`` (both included)."""
        if not t_lo < t_hi:
            raise ValueError("t_lo must be smaller than t_hi")
        out = [t_hi]
        t, dt = t_hi, self.dt_min
        while True:
            if t - dt <= t_lo + 0.5 * dt:
                break
            t -= dt
            out.append(t)
            dt = min(dt * self.growth, self.dt_max)
        out.append(t_lo)
        return np.array(out)

    def refined(self, factor: int = 2) -> "TimeStepping":
        return TimeStepping(self.dt_min / factor, self.growth ** (1.0 / factor), self.dt_max / factor)


@dataclass(frozen=True, eq=False)
class ValueSurface:
    """Value function sampled on ``times x grid.nodes`` for one segment.

    ``times`` decreases from the segment end ``t_hi`` to ``t_lo``; ``values[k]``
    is the slice at ``times[k]``.  ``obstacle`` holds the early-exercise payoff
    on the same layout.
    """

    grid: PriceGrid
    times: np.ndarray
    values: np.ndarray
    segment: int
    t_lo: float
    t_hi: float
    obstacle: np.ndarray
    tolerance: float = 1e-5
    payoff_residual: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "values", "obstacle"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.values.shape != (self.times.size, self.grid.size):
            raise ValueError("values must have shape (len(times), grid.size)")
        if self.obstacle.shape != self.values.shape:
            raise ValueError("obstacle must match values")
        if self.payoff_residual is None:
            res = self.values - self.obstacle
            res.setflags(write=False)
            object.__setattr__(self, "payoff_residual", res)

    @property
    def exercise_mask(self) -> np.ndarray:
        return self.payoff_residual <= self.tolerance

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def slice_at(self, t: float) -> np.ndarray:
        """Slice at the time node closest to ``t``."""
        return self.values[int(np.argmin(np.abs(self.times - t)))]

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def with_meta(self, **kw) -> "ValueSurface":
        meta = dict(self.meta)
        meta.update(kw)
        return replace(self, meta=meta)


@dataclass(frozen=True, eq=False)
class BoundaryCurve:
    times: np.ndarray
    levels: np.ndarray
    tolerance: float
    refined: np.ndarray
    cells: np.ndarray

    def __post_init__(self):
        for name in ("times", "levels", "refined", "cells"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def ascending(self) -> "BoundaryCurve":
        order = np.argsort(self.times, kind="stable")
        return BoundaryCurve(self.times[order], self.levels[order], self.tolerance,
                             self.refined[order], self.cells[order])

    def window(self, t_from: float, t_to: float, closed: bool = False) -> "BoundaryCurve":
        if closed:
            m = (self.times >= t_from) & (self.times <= t_to)
        else:
            m = (self.times >= t_from) & (self.times < t_to)
        return BoundaryCurve(self.times[m], self.levels[m], self.tolerance, self.refined[m], self.cells[m])

    @staticmethod
    def concatenate(curves: Sequence["BoundaryCurve"]) -> "BoundaryCurve":
        """Join segment curves in ascending time; a shared endpoint keeps the later segment's sample."""
        parts = sorted((c.ascending() for c in curves), key=lambda c: c.times[0])
        ts, ls, rs, cs = [], [], [], []
        for k, c in enumerate(parts):
            m = np.ones(c.times.size, dtype=bool)
            if k + 1 < len(parts):
                m &= c.times < parts[k + 1].times[0]
            ts.append(c.times[m]); ls.append(c.levels[m]); rs.append(c.refined[m]); cs.append(c.cells[m])
        tol = max(c.tolerance for c in parts)
        return BoundaryCurve(np.concatenate(ts), np.concatenate(ls), tol, np.concatenate(rs), np.concatenate(cs))


Payoff = Callable[[np.ndarray], np.ndarray]


def put_payoff(strike: float) -> Payoff:
    def payoff(x):
        return np.maximum(strike - np.asarray(x, dtype=float), 0.0)
    return payoff
