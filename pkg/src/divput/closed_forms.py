"""Black-Scholes closed forms used as oracles and bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .model import MarketParams


def std_normal_cdf(y):
    """Standard normal CDF, accurate to double precision in both tails."""
    out = ndtr(np.asarray(y, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def lognormal_density(t: float, y, x: float, params: MarketParams):
    """Density at ``y`` of ``x exp(sigma W_t + (r - sigma^2/2) t)``; zero for ``y <= 0``."""
    if not (t > 0 and x > 0):
        raise ValueError("lognormal density needs t > 0 and x > 0")
    y = np.asarray(y, dtype=float)
    s = params.volatility
    out = np.zeros_like(y)
    pos = y > 0
    yp = y[pos]
    z = np.log(yp / x) - (params.rate - 0.5 * s * s) * t
    out[pos] = np.exp(-z * z / (2 * s * s * t)) / (s * yp * math.sqrt(2 * math.pi * t))
    return float(out) if out.ndim == 0 else out


def european_put(t_to_mat: float, x, strike: float, params: MarketParams):
    """Black-Scholes European put with ``t_to_mat`` years left."""
    if t_to_mat < 0:
        raise ValueError("time to maturity must be non-negative")
    x = np.asarray(x, dtype=float)
    r, s = params.rate, params.volatility
    if strike <= 0:
        out = np.zeros_like(x)
    elif t_to_mat == 0:
        out = np.maximum(strike - x, 0.0)
    else:
        disc_k = strike * math.exp(-r * t_to_mat)
        out = np.empty_like(x)
        zero = x <= 0
        out[zero] = disc_k
        xp = x[~zero]
        sd = s * math.sqrt(t_to_mat)
        d1 = (np.log(xp / strike) + (r + 0.5 * s * s) * t_to_mat) / sd
        d2 = d1 - sd
        out[~zero] = disc_k * ndtr(-d2) - xp * ndtr(-d1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PerpetualPut:
    strike: float
    alpha: float
    boundary: float

    def value(self, x):
        x = np.asarray(x, dtype=float)
        c = self.boundary
        with np.errstate(divide="ignore", over="ignore"):
            cont = (self.strike - c) * np.power(np.maximum(x, c) / c, self.alpha)
        out = np.where(x < c, self.strike - x, cont)
        return float(out) if out.ndim == 0 else out

    def derivatives(self, x):
        """First and second derivatives; the second is taken as 0 at the boundary itself."""
        x = np.asarray(x, dtype=float)
        c, a, k = self.boundary, self.alpha, self.strike
        xc = np.maximum(x, c)
        d1 = np.where(x < c, -1.0, a * (k - c) / c * (xc / c) ** (a - 1))
        d2 = np.where(x <= c, 0.0, a * (a - 1) * (k - c) / c ** 2 * (xc / c) ** (a - 2))
        return d1, d2


def perpetual_put_model(strike: float, params: MarketParams) -> PerpetualPut:
    alpha = -2.0 * params.rate / params.volatility ** 2
    boundary = -strike * alpha / (1.0 - alpha)
    return PerpetualPut(strike, alpha, boundary)


def perpetual_put(x, strike: float, params: MarketParams):
    """Perpetual American put: returns ``(value, boundary)``."""
    model = perpetual_put_model(strike, params)
    return model.value(x), model.boundary


def perpetual_boundary(strike: float, params: MarketParams) -> float:
    return 2.0 * params.rate * strike / (params.volatility ** 2 + 2.0 * params.rate)
