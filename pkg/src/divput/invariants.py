"""Structural checks that every solved value surface must pass."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ValueSurface


@dataclass(frozen=True)
class SurfaceViolations:
    """Worst violation of each property over all slices (0 when it holds)."""

    below_payoff: float
    above_strike: float
    increasing: float
    lipschitz: float
    convexity: float

    def worst(self, convex: bool = False) -> float:
        vals = [self.below_payoff, self.above_strike, self.increasing, self.lipschitz]
        if convex:
            vals.append(self.convexity)
        return max(vals)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("below_payoff", "above_strike", "increasing", "lipschitz", "convexity")}


def convexity_defect(x: np.ndarray, values: np.ndarray) -> np.ndarray:
    """How far each interior node lies above the chord of its neighbours."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    chord = (hp * values[..., :-2] + hm * values[..., 2:]) / (hm + hp)
    return values[..., 1:-1] - chord


def surface_violations(surface: ValueSurface, strike: float) -> SurfaceViolations:
    x = surface.x
    u = surface.values
    payoff = np.maximum(strike - x, 0.0)
    du = np.diff(u, axis=-1)
    dx = np.diff(x)
    return SurfaceViolations(
        below_payoff=float(max(np.max(payoff - u), 0.0)),
        above_strike=float(max(np.max(u - strike), 0.0)),
        increasing=float(max(np.max(du), 0.0)),
        lipschitz=float(max(np.max(-du - dx), 0.0)),
        convexity=float(max(np.max(convexity_defect(x, u)), 0.0)),
    )
