"""Scenario files: JSON description of market, option, dividends, engine and tolerances."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

from .model import (DivPutError, DividendFunction, DividendSchedule, MarketParams, OptionSpec,
                    PriceGrid, TimeStepping, validate_schedule)


class ConfigInvalid(DivPutError, ValueError):
    pass


DEFAULT_CHECKS = {
    "invariant_tol": 1e-6,      # x K
    "jump_ratio": 0.6,
    "residual_ratio": 1.5,
    "residual_n_log": 300,
    "slope_rel": 0.1,
    "smooth_contact": 0.05,
    "smooth_contact_samples": 10,
    "cross_engine_rel": 1e-3,   # x K
    "cross_engine_points": [0.5, 0.8, 1.0, 1.2],  # x K
    "mc_rel": 3e-3,             # x K
    "mc_sigmas": 3.0,
    "mc_paths": 100_000,
    "mc_steps": 50,
}

DEFAULT_ENGINE = {
    "kind": "pde",
    "grid": {"n_log": 1200},
    "time_steps": {"dt_min": 1.0 / 2920, "growth": 1.03, "dt_max": 0.005},
    "tree_steps": 2000,
    "seed": 12345,
    "scheme": "crank_nicolson",
}


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    spec: OptionSpec
    params: MarketParams
    schedule: DividendSchedule
    engine: dict
    checks: dict
    escrowed: Optional[dict] = None
    raw: dict = field(default_factory=dict)

    def grid(self, scale: float = 1.0) -> PriceGrid:
        g = self.engine["grid"]
        return PriceGrid.build(self.spec.strike, self.spec.spot,
                               n_log=max(4, int(round(g.get("n_log", 1200) * scale))),
                               x_min_log=g.get("x_min_log"), x_max=g.get("x_max"))

    def stepping(self) -> TimeStepping:
        ts = self.engine["time_steps"]
        return TimeStepping(ts["dt_min"], ts["growth"], ts["dt_max"])


def _dividend(entry: dict) -> tuple:
    fam = entry.get("family")
    try:
        date = float(entry["date"])
        if fam == "proportional":
            if "fraction" in entry:
                fn = DividendFunction.from_fraction(entry["fraction"])
            else:
                fn = DividendFunction.proportional(entry["rho"])
        elif fam == "constant":
            fn = DividendFunction.constant(entry["amount"])
        elif fam == "mixed":
            fn = DividendFunction.mixed(entry["a"], entry["b"], entry["c"])
        elif fam == "identity":
            fn = DividendFunction.identity()
        elif fam == "threshold":
            fn = DividendFunction.threshold(entry["b"], entry["d0"])
        else:
            raise ConfigInvalid(f"unknown dividend family {fam!r}")
    except KeyError as exc:
        raise ConfigInvalid(f"dividend entry {entry} misses {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(f"bad dividend entry {entry}: {exc}") from None
    return date, fn


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def scenario_from_dict(data: Any, name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ConfigInvalid("scenario must be a JSON object")
    try:
        m, o = data["market"], data["option"]
        params = MarketParams(float(m["r"]), float(m["sigma"]))
        spec = OptionSpec(float(o["K"]), float(o["T"]), float(o.get("spot", o["K"])))
    except KeyError as exc:
        raise ConfigInvalid(f"missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from None
    divs = data.get("dividends", [])
    if not isinstance(divs, list):
        raise ConfigInvalid("dividends must be a list")
    try:
        schedule = validate_schedule(DividendSchedule.of(*[_dividend(d) for d in divs]), spec)
    except ConfigInvalid:
        raise
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from None
    engine = _merge(DEFAULT_ENGINE, data.get("engine", {}))
    if engine["kind"] not in ("pde", "tree", "mc"):
        raise ConfigInvalid(f"unknown engine {engine['kind']!r}")
    checks = _merge(DEFAULT_CHECKS, data.get("checks", {}))
    return Scenario(data.get("name", name), spec, params, schedule, engine, checks,
                    data.get("escrowed"), data)


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path} is not valid JSON: {exc}") from None
    return scenario_from_dict(data, name=path)


def bundled(name: str) -> Scenario:
    """One of the scenarios shipped with the package (``default`` or ``coarse``)."""
    text = resources.files("divput").joinpath("scenarios", f"{name}.json").read_text()
    return scenario_from_dict(json.loads(text), name=name)
