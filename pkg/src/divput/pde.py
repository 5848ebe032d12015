"""Finite-difference obstacle solver, one segment at a time.

Backward theta-scheme for ``u_t + (s^2 x^2 / 2) u_xx + r x u_x - r u = 0``
on a non-uniform price grid, with ``u >= obstacle`` enforced at every step by
projected SOR.  Crank-Nicolson is the default, restarted with two implicit
half steps from every segment end because the terminal data there is kinked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from . import kernels
from .boundary import extraction_tolerance
from .dividends import compose_g
from .model import (DivPutError, DividendSchedule, MarketParams, OptionSpec,
                    PriceGrid, TimeStepping, ValueSurface, put_payoff)


class PsorNonConvergence(DivPutError, RuntimeError):
    def __init__(self, iterations: int, t: float):
        self.iterations = iterations
        self.t = t
        super().__init__(f"PSOR did not converge in {iterations} sweeps at t={t:g}")


class GridTooCoarse(DivPutError, ValueError):
    pass


@dataclass(frozen=True)
class PdeSettings:
    scheme: str = "crank_nicolson"
    omega: float = 1.2
    tol_rel: float = 1e-9
    max_iter: int = 10_000
    rannacher: bool = True

    def __post_init__(self):
        if self.scheme not in ("implicit", "crank_nicolson"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.omega < 2:
            raise ValueError("relaxation must lie in (0, 2)")


Steps = Union[int, TimeStepping, Sequence[float]]
Obstacle = Callable[[float, np.ndarray], np.ndarray]

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(64)


def time_nodes(steps: Steps, t_lo: float, t_hi: float) -> np.ndarray:
    """Decreasing time nodes from ``t_hi`` to ``t_lo``."""
    if isinstance(steps, TimeStepping):
        return steps.times(t_lo, t_hi)
    if isinstance(steps, (int, np.integer)):
        if steps < 1:
            raise ValueError("need at least one time step")
        return np.linspace(t_hi, t_lo, int(steps) + 1)
    times = np.asarray(steps, dtype=float)
    if times[0] != t_hi or times[-1] != t_lo or np.any(np.diff(times) >= 0):
        raise ValueError("explicit time nodes must decrease from t_hi to t_lo")
    return times


def operator_coefficients(x: np.ndarray, params: MarketParams):
    """Three-point coefficients of the pricing operator at interior nodes."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    xi = x[1:-1]
    a = 0.5 * params.volatility ** 2 * xi * xi
    b = params.rate * xi
    lower = 2 * a / (hm * (hm + hp)) - b * hp / (hm * (hm + hp))
    upper = 2 * a / (hp * (hm + hp)) + b * hm / (hp * (hm + hp))
    diag = -2 * a / (hm * hp) + b * (hp - hm) / (hm * hp) - params.rate
    return lower, diag, upper


def far_field_value(terminal: Callable, x: float, tau: float, params: MarketParams) -> float:
    """``e^{-r tau} E[terminal(S_tau)]`` from ``S_0 = x``, by Gauss-Hermite quadrature."""
    if tau <= 0:
        return float(np.asarray(terminal(np.array([x])))[0])
    s = params.volatility
    z = math.sqrt(2.0) * _GH_NODES
    y = x * np.exp((params.rate - 0.5 * s * s) * tau + s * math.sqrt(tau) * z)
    vals = np.asarray(terminal(y), dtype=float)
    return math.exp(-params.rate * tau) * float(np.dot(_GH_WEIGHTS, vals)) / math.sqrt(math.pi)


def solve_segment_pde(terminal_payoff: Callable, t_lo: float, t_hi: float, grid: PriceGrid,
                      time_steps: Steps, spec: OptionSpec, params: MarketParams,
                      scheme: Optional[str] = None, american: bool = True,
                      obstacle: Optional[Obstacle] = None, segment: int = 0,
                      settings: Optional[PdeSettings] = None) -> ValueSurface:
    """Value surface on ``[t_lo, t_hi]`` for terminal data ``terminal_payoff``.

    ``obstacle(t, x)`` overrides the default early-exercise payoff
    ``(K - x)^+``; ``american=False`` drops the constraint altogether.
    """
    if not t_lo < t_hi:
        raise ValueError("t_lo must be smaller than t_hi")
    settings = settings or PdeSettings()
    if scheme is not None:
        settings = PdeSettings(scheme, settings.omega, settings.tol_rel, settings.max_iter, settings.rannacher)
    if grid.size < 16 or grid.x_max < 2 * spec.strike:
        raise GridTooCoarse(f"grid of {grid.size} nodes up to {grid.x_max:g} is too coarse")
    x = grid.nodes
    K, r = spec.strike, params.rate
    times = time_nodes(time_steps, t_lo, t_hi)
    payoff = put_payoff(K)

    if obstacle is None:
        fixed = payoff(x)

        def obstacle(t, xs, _fixed=fixed):
            return _fixed

    lower, diag, upper = operator_coefficients(x, params)
    tol = settings.tol_rel * K
    v = np.asarray(terminal_payoff(x), dtype=float).copy()
    values = [v.copy()]
    obst = [np.asarray(obstacle(t_hi, x), dtype=float)]
    left = v[0]
    sweeps = []
    theta_main = 0.5 if settings.scheme == "crank_nicolson" else 1.0

    def step(v_old, left_old, t_old, dt, theta):
        t_new = t_old - dt
        psi = np.asarray(obstacle(t_new, x), dtype=float)
        left_new = math.exp(-r * dt) * left_old
        if american:
            left_new = max(left_new, float(psi[0]))
        right_new = far_field_value(terminal_payoff, x[-1], t_hi - t_new, params)
        inner = v_old[1:-1]
        rhs = inner + (1 - theta) * dt * (lower * v_old[:-2] + diag * inner + upper * v_old[2:])
        rhs[0] += theta * dt * lower[0] * left_new
        rhs[-1] += theta * dt * upper[-1] * right_new
        lo_band = -theta * dt * lower
        di_band = 1.0 - theta * dt * diag
        up_band = -theta * dt * upper
        new = np.empty_like(v_old)
        new[0], new[-1] = left_new, right_new
        if american:
            u = np.maximum(inner, psi[1:-1]).copy()
            it = kernels.psor(lo_band, di_band, up_band, rhs, np.ascontiguousarray(psi[1:-1]), u,
                              settings.omega, tol, settings.max_iter)
            if it < 0:
                raise PsorNonConvergence(-it, t_new)
            sweeps.append(it)
            new[1:-1] = u
        else:
            ab = np.zeros((3, inner.size))
            ab[0, 1:] = up_band[:-1]
            ab[1] = di_band
            ab[2, :-1] = lo_band[1:]
            new[1:-1] = solve_banded((1, 1), ab, rhs)
        return new, left_new, psi

    for k in range(1, times.size):
        dt = times[k - 1] - times[k]
        if k == 1 and settings.rannacher and settings.scheme == "crank_nicolson":
            half, left_h, _ = step(v, left, times[0], 0.5 * dt, 1.0)
            v, left, psi = step(half, left_h, times[0] - 0.5 * dt, 0.5 * dt, 1.0)
        else:
            v, left, psi = step(v, left, times[k - 1], dt, theta_main)
        values.append(v)
        obst.append(psi)
    meta = {"engine": "pde", "strike": K, "psor_tol": tol, "scheme": settings.scheme,
            "american": american, "sweeps": int(np.sum(sweeps)) if sweeps else 0,
            "backend": kernels.BACKEND}
    eps = extraction_tolerance(K, tol)
    return ValueSurface(grid, times, np.array(values), segment, t_lo, t_hi, np.array(obst),
                        tolerance=eps, meta=meta)


def segment_bounds(spec: OptionSpec, schedule: DividendSchedule) -> List[tuple]:
    """``(t_lo, t_hi, event)`` per segment, latest first; ``event`` ends the segment."""
    dates = [0.0] + list(schedule.dates) + [spec.maturity]
    events = [None] + list(schedule.events)
    out = []
    for i in range(len(dates) - 1, 0, -1):
        out.append((dates[i - 1], dates[i], events[i] if i < len(dates) - 1 else None))
    return out


def price_american_pde(spec: OptionSpec, params: MarketParams, schedule: Optional[DividendSchedule] = None,
                       grid: Optional[PriceGrid] = None, stepping: Optional[Steps] = None,
                       scheme: Optional[str] = None, american: bool = True,
                       settings: Optional[PdeSettings] = None) -> List[ValueSurface]:
    """Segment recursion: one surface per segment, the one ending at ``T`` first.

    The terminal data of each earlier segment is ``g(x) = u(t_d, x - D(x))``
    built from the first slice of the segment after it.
    """
    schedule = schedule if schedule is not None else DividendSchedule()
    grid = grid or PriceGrid.build(spec.strike, spec.spot)
    stepping = stepping if stepping is not None else TimeStepping()
    terminal: Callable = put_payoff(spec.strike)
    surfaces = []
    for i, (t_lo, t_hi, event) in enumerate(segment_bounds(spec, schedule)):
        surf = solve_segment_pde(terminal, t_lo, t_hi, grid, stepping, spec, params,
                                 scheme=scheme, american=american, segment=i, settings=settings)
        surf = surf.with_meta(terminal=terminal, end_event=event)
        surfaces.append(surf)
        if t_lo > 0:
            ev = schedule.events[schedule.count - 1 - i]
            terminal = compose_g(grid.nodes, surf.values[-1], spec.strike, ev.function,
                                 tolerance=surf.tolerance)
    return surfaces


def surface_value(surfaces: Sequence[ValueSurface], t: float, x) -> np.ndarray:
    """Value at ``(t, x)``: monotone cubic in ``x``, linear between time nodes."""
    for s in surfaces:
        if s.t_lo <= t < s.t_hi or (t == s.t_hi and s.segment == 0):
            break
    else:
        raise ValueError(f"t={t:g} outside the solved horizon")
    xs = np.asarray(x, dtype=float)
    terminal = s.meta.get("terminal")
    if t == s.t_hi and callable(terminal):
        # the end slice is known in closed form; skip the interpolation
        out = np.asarray(terminal(xs), dtype=float)
        return float(out) if np.ndim(out) == 0 else out
    times = s.times
    k = int(np.clip(np.searchsorted(-times, -t), 1, times.size - 1))
    t0, t1 = times[k - 1], times[k]
    w = (t0 - t) / (t0 - t1)
    v0 = PchipInterpolator(s.x, s.values[k - 1])(xs)
    v1 = PchipInterpolator(s.x, s.values[k])(xs)
    out = (1 - w) * v0 + w * v1
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class ResidualField:
    times: np.ndarray
    values: np.ndarray  # NaN outside the measured set

    @property
    def sup(self) -> float:
        return float(np.nanmax(self.values)) if np.any(np.isfinite(self.values)) else math.nan


def pde_residual(surface: ValueSurface, params: MarketParams, spec: OptionSpec,
                 min_gap_nodes: int = 3, exclude_end: float = 0.1,
                 band: Optional[float] = None, x_cap: Optional[float] = None) -> ResidualField:
    """``|u_t + A u|`` at interior continuation nodes.

    A node counts when it and its neighbours in time are at least
    ``min_gap_nodes`` nodes (and ``band`` in price, if given) above the
    exercise region.  Slices within ``exclude_end`` (fraction of the segment)
    of ``t_hi`` are skipped, as are nodes above ``x_cap``.
    """
    x = surface.x
    u = surface.values
    t = surface.times
    lower, diag, upper = operator_coefficients(x, params)
    res = np.full(u.shape, np.nan)
    edge = np.array([int(np.argmax(~m)) if (~m).any() else x.size for m in surface.exercise_mask])
    cut = surface.t_hi - exclude_end * (surface.t_hi - surface.t_lo)
    x_cap = x_cap if x_cap is not None else x[-1]
    for k in range(1, t.size - 1):
        if t[k] > cut:
            continue
        h1 = t[k - 1] - t[k]
        h2 = t[k] - t[k + 1]
        ut = (h2 / (h1 * (h1 + h2)) * u[k - 1] - (h2 - h1) / (h1 * h2) * u[k]
              - h1 / (h2 * (h1 + h2)) * u[k + 1])
        au = lower * u[k, :-2] + diag * u[k, 1:-1] + upper * u[k, 2:]
        r = np.abs(ut[1:-1] + au)
        first = int(max(edge[k - 1], edge[k], edge[k + 1])) + min_gap_nodes
        ok = np.zeros(x.size, dtype=bool)
        ok[first:x.size - 1 - min_gap_nodes] = True
        if band is not None:
            c = x[min(int(max(edge[k - 1:k + 2])), x.size - 1)]
            ok &= x >= c + band
        ok &= x <= x_cap
        row = np.full(x.size, np.nan)
        row[1:-1] = np.where(ok[1:-1], r, np.nan)
        res[k] = row
    return ResidualField(t.copy(), res)
