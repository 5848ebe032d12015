"""Longstaff-Schwartz Monte Carlo under lognormal dynamics with dividend drops."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dividends import eval_dividend
from .model import DivPutError, DividendSchedule, MarketParams, OptionSpec

BLOCK = 8192


class DateNotOnStepGrid(DivPutError, ValueError):
    pass


class RegressionSingular(DivPutError, ArithmeticError):
    pass


def _step_times(spec: OptionSpec, t0: float, n_steps: int) -> np.ndarray:
    if not 0 <= t0 < spec.maturity:
        raise ValueError("t0 must lie in [0, T)")
    return np.linspace(t0, spec.maturity, n_steps + 1)


def _dividend_steps(schedule: DividendSchedule, times: np.ndarray) -> dict:
    """Map step index -> dividend function for each date after ``times[0]``."""
    dt = times[1] - times[0]
    out = {}
    for ev in schedule.events:
        if ev.date <= times[0]:
            continue
        k = (ev.date - times[0]) / dt
        kr = int(round(k))
        if abs(k - kr) > 1e-9 * max(1.0, k):
            raise DateNotOnStepGrid(f"dividend date {ev.date:g} is not a multiple of dt={dt:g} from t0")
        out[kr] = ev.function
    return out


def _normals(seed: int, n_paths: int, n_steps: int) -> np.ndarray:
    """Standard normals keyed by ``(seed, block)`` so any block can be regenerated alone."""
    out = np.empty((n_paths, n_steps))
    for b, start in enumerate(range(0, n_paths, BLOCK)):
        stop = min(start + BLOCK, n_paths)
        gen = np.random.Generator(np.random.Philox(key=[seed, b]))
        out[start:stop] = gen.standard_normal((stop - start, n_steps))
    return out


def simulate_paths(spec: OptionSpec, schedule: Optional[DividendSchedule], params: MarketParams,
                   x0: float, t0: float, n_paths: int, n_steps: int, seed: int) -> np.ndarray:
    """Price paths of shape ``(n_paths, n_steps + 1)`` on an even grid over ``[t0, T]``.

    Column ``k`` is the ex-dividend price at ``t0 + k dt``; a dividend dated
    on column ``k`` has already been paid there.
    """
    schedule = schedule if schedule is not None else DividendSchedule()
    times = _step_times(spec, t0, n_steps)
    drops = _dividend_steps(schedule, times)
    dt = times[1] - times[0]
    s = params.volatility
    z = _normals(seed, n_paths, n_steps)
    growth = np.exp((params.rate - 0.5 * s * s) * dt + s * math.sqrt(dt) * z)
    paths = np.empty((n_paths, n_steps + 1))
    paths[:, 0] = x0
    for k in range(1, n_steps + 1):
        cur = paths[:, k - 1] * growth[:, k - 1]
        if k in drops:
            cur = cur - eval_dividend(drops[k], cur)
        paths[:, k] = cur
    return paths


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n_paths: int


def _basis(s: np.ndarray, strike: float, degree: int) -> np.ndarray:
    y = s / strike
    return np.vander(y, degree + 1, increasing=True)


def price_ls(spec: OptionSpec, schedule: Optional[DividendSchedule], params: MarketParams,
             x0: float, t0: float, n_paths: int, n_steps: int, basis_degree: int = 3,
             seed: int = 0, american: bool = True) -> McEstimate:
    """Longstaff-Schwartz estimate of the put at ``(t0, x0)``.

    Continuation values are regressed on monomials of ``S/K`` over
    in-the-money paths; steps with fewer such paths than basis functions are
    treated as continuation.
    """
    paths = simulate_paths(spec, schedule, params, x0, t0, n_paths, n_steps, seed)
    K = spec.strike
    dt = (spec.maturity - t0) / n_steps
    disc = math.exp(-params.rate * dt)
    cash = np.maximum(K - paths[:, -1], 0.0)
    if american:
        for k in range(n_steps - 1, 0, -1):
            cash *= disc
            s = paths[:, k]
            exercise = K - s
            itm = exercise > 0
            n_itm = int(np.count_nonzero(itm))
            if n_itm <= basis_degree + 1:
                continue
            a = _basis(s[itm], K, basis_degree)
            coef, _, rank, _ = np.linalg.lstsq(a, cash[itm], rcond=None)
            if rank < a.shape[1]:
                raise RegressionSingular(f"rank {rank} regression at step {k} with {n_itm} paths")
            stop = exercise[itm] > a @ coef
            idx = np.flatnonzero(itm)[stop]
            cash[idx] = exercise[idx]
    else:
        cash *= disc ** (n_steps - 1)
    cash *= disc
    est = float(np.mean(cash))
    if american:
        est = max(est, K - x0)
    return McEstimate(est, float(np.std(cash, ddof=1) / math.sqrt(n_paths)), n_paths)
