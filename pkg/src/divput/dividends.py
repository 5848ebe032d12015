"""Dividend maps and the objects derived from them at a dividend date.

``g(x) = u(t_d, x - D(x))`` is the payoff a segment ending on a dividend date
pays at that date, and ``gamma`` is the drift of the discounted process
``g(S)``; together with ``x_star`` and ``inf_ratio`` they drive the boundary
asymptotics checked in :mod:`divput.boundary`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from .model import DivPutError, DividendFunction, MarketParams, PriceGrid


class NegativePrice(DivPutError, ValueError):
    pass


class NonPositivePrice(DivPutError, ValueError):
    pass


class NotPositiveDividend(DivPutError, ValueError):
    pass


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


def eval_dividend(df: DividendFunction, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise NegativePrice("dividend functions are defined for x >= 0")
    p = df.params
    fam = df.family
    if fam == "proportional":
        out = (1.0 - p["rho"]) * x
    elif fam == "constant":
        out = np.minimum(p["amount"], x)
    elif fam == "mixed":
        out = np.minimum(p["a"] + p["b"] * x, p["c"] * x)
    elif fam == "identity":
        out = x.copy()
    else:
        out = p["b"] * np.maximum(x - p["d0"], 0.0)
    return _scalar_or_array(out)


def left_derivative(df: DividendFunction, x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise NonPositivePrice("left derivative needs x > 0")
    p = df.params
    fam = df.family
    if fam == "proportional":
        out = np.full_like(x, 1.0 - p["rho"])
    elif fam == "constant":
        out = np.where(x <= p["amount"], 1.0, 0.0)
    elif fam == "mixed":
        a, b, c = p["a"], p["b"], p["c"]
        if c <= b:
            out = np.full_like(x, c)
        else:
            out = np.where(x <= a / (c - b), c, b)
    elif fam == "identity":
        out = np.ones_like(x)
    else:
        out = np.where(x > p["d0"], p["b"], 0.0)
    return _scalar_or_array(out)


def scan_grid(strike: float = 1.0, n: int = 100_000) -> np.ndarray:
    return np.geomspace(1e-4 * strike, 1e2 * strike, n)


def inf_ratio(df: DividendFunction, check: bool = True, scale: float = 1.0) -> float:
    """``inf_{x>0} x / D(x)`` in closed form, optionally cross-checked by a log scan."""
    p = df.params
    fam = df.family
    if fam == "proportional":
        mu = 1.0 / (1.0 - p["rho"])
    elif fam in ("constant", "identity"):
        mu = 1.0
    elif fam == "mixed":
        a, b, c = p["a"], p["b"], p["c"]
        if c == 0 or (a == 0 and b == 0):
            raise NotPositiveDividend("mixed dividend vanishes identically")
        mu = 1.0 / c if a > 0 else 1.0 / min(b, c)
    else:
        raise NotPositiveDividend("threshold dividend vanishes on [0, d0]")
    if check:
        xs = scan_grid(scale)
        scanned = float(np.min(xs / eval_dividend(df, xs)))
        if abs(scanned - mu) > 1e-6 * mu:
            raise ArithmeticError(f"closed-form ratio {mu} disagrees with scan {scanned}")
    return mu


def x_star(df: DividendFunction, c_bar_td: float) -> float:
    """``sup{x : x - D(x) < c_bar_td}``; infinite only for the identity map."""
    if df.family == "identity":
        return math.inf

    def f(x):
        return x - eval_dividend(df, x)

    lo, hi = 0.0, max(1.0, c_bar_td)
    while f(hi) < c_bar_td:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            return math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < c_bar_td:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return hi


class SliceInterpolant:
    """Shape-preserving interpolant of a put-like value slice.

    Below the slice's exercise boundary the value is the payoff ``K - y``
    exactly; above it a monotone cubic runs through the boundary point and the
    continuation nodes.  Past the last node the tangent line is used, floored
    at zero.
    """

    def __init__(self, x: np.ndarray, values: np.ndarray, strike: float, boundary: float):
        self.strike = float(strike)
        self.boundary = float(boundary)
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        keep = x > self.boundary + 1e-9 * max(1.0, self.boundary)
        xs = np.concatenate(([self.boundary], x[keep]))
        vs = np.concatenate(([self.strike - self.boundary], values[keep]))
        # enforce the non-increasing shape the value function must have
        vs = np.minimum.accumulate(vs)
        self.x_end = float(xs[-1])
        self.v_end = float(vs[-1])
        self.slope_end = float((vs[-1] - vs[-2]) / (xs[-1] - xs[-2])) if xs.size > 1 else 0.0
        self._pchip = PchipInterpolator(xs, vs, extrapolate=False) if xs.size > 1 else None
        self._d1 = self._pchip.derivative() if self._pchip is not None else None

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        low = y <= self.boundary
        high = y > self.x_end
        mid = ~(low | high)
        out[low] = self.strike - y[low]
        if self._pchip is not None:
            out[mid] = self._pchip(y[mid])
        out[high] = np.maximum(self.v_end + self.slope_end * (y[high] - self.x_end), 0.0)
        return _scalar_or_array(out)


@dataclass(frozen=True)
class GApplication:
    """Composed payoff ``g(x) = base(x - D(x))`` at a dividend date."""

    base: SliceInterpolant
    dividend: DividendFunction
    strike: float
    c_bar: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = x - eval_dividend(self.dividend, x)
        return self.base(y)

    @property
    def x_star(self) -> float:
        return x_star(self.dividend, self.c_bar)


def compose_g(base_x: np.ndarray, base_values: np.ndarray, strike: float,
              df: DividendFunction, c_bar: Optional[float] = None,
              tolerance: float = 1e-5) -> GApplication:
    """Build ``g`` from a solved slice at the dividend date."""
    from .boundary import exercise_edge

    base_x = np.asarray(base_x, dtype=float)
    base_values = np.asarray(base_values, dtype=float)
    if c_bar is None:
        obstacle = np.maximum(strike - base_x, 0.0)
        c_bar = exercise_edge(base_x, base_values, obstacle, tolerance)
    base = SliceInterpolant(base_x, base_values, strike, c_bar)
    return GApplication(base, df, float(strike), float(c_bar))


Derivs = Tuple[Callable, Callable, Callable]


def surface_derivatives(x: np.ndarray, values: np.ndarray, strike: float, c_bar: float) -> Derivs:
    """Value, first and second derivative of a solved slice as callables.

    Nodal central differences; exact payoff derivatives below ``c_bar`` and
    zero curvature at the node straddling it.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    d1 = np.empty_like(v)
    d2 = np.zeros_like(v)
    d1[1:-1] = (-hp / (hm * (hm + hp)) * v[:-2] + (hp - hm) / (hm * hp) * v[1:-1]
                + hm / (hp * (hm + hp)) * v[2:])
    d2[1:-1] = 2.0 * (v[:-2] / (hm * (hm + hp)) - v[1:-1] / (hm * hp) + v[2:] / (hp * (hm + hp)))
    d1[0] = (v[1] - v[0]) / (x[1] - x[0])
    d1[-1] = (v[-1] - v[-2]) / (x[-1] - x[-2])
    ex = x <= c_bar
    d1[ex] = -1.0
    d2[ex] = 0.0
    first_cont = int(np.searchsorted(x, c_bar, side="right"))
    if first_cont < x.size:
        d2[first_cont] = 0.0
    interp = SliceInterpolant(x, v, strike, c_bar)

    def f1(y):
        y = np.asarray(y, dtype=float)
        out = np.interp(y, x, d1, right=0.0)
        return np.where(y <= c_bar, -1.0, out)

    def f2(y):
        y = np.asarray(y, dtype=float)
        out = np.interp(y, x, d2, right=0.0)
        return np.where(y <= c_bar, 0.0, out)

    return interp, f1, f2


def perpetual_derivatives(strike: float, params: MarketParams) -> Derivs:
    from .closed_forms import perpetual_put_model

    model = perpetual_put_model(strike, params)
    return model.value, (lambda y: model.derivatives(y)[0]), (lambda y: model.derivatives(y)[1])


@dataclass(frozen=True)
class GammaFunction:
    dividend: DividendFunction
    derivs: tuple
    params: MarketParams
    strike: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        value, d1, d2 = self.derivs
        dx = eval_dividend(self.dividend, x)
        y = x - dx
        slope = 1.0 - np.asarray(left_derivative(self.dividend, x))
        s2 = self.params.volatility ** 2
        r = self.params.rate
        out = (0.5 * s2 * x * x * slope * slope * np.asarray(d2(y))
               + r * x * slope * np.asarray(d1(y)) - r * np.asarray(value(y)))
        return _scalar_or_array(out)

    def scan(self, n: int = 100_000) -> Tuple[float, float]:
        """``(sup gamma^+, inf gamma)`` over the log scan grid."""
        vals = self(scan_grid(self.strike, n))
        return float(max(np.max(vals), 0.0)), float(np.min(vals))


def gamma(df: DividendFunction, base_derivs: Derivs, params: MarketParams, strike: float) -> GammaFunction:
    return GammaFunction(df, tuple(base_derivs), params, float(strike))
