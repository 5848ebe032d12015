"""Command line: ``divput price | boundary | verify | figure1``.

Exit status is 0 on success, 1 when ``verify`` finds a failing check and 2
for malformed input or engine errors (with a diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import copy
import io
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .boundary import extract_boundary
from .config import ConfigInvalid, Scenario, bundled, load_scenario, scenario_from_dict
from .escrowed import solve_escrowed
from .lattice import price_american_tree
from .model import BoundaryCurve, DivPutError
from .montecarlo import price_ls
from .pde import price_american_pde, surface_value
from .suite import aligned_steps, run_suite

FIGURE1 = {
    "name": "figure1",
    "market": {"r": 0.04, "sigma": 0.3},
    "option": {"K": 100.0, "T": 4.0, "spot": 100.0},
    "dividends": [{"date": 3.5, "family": "proportional", "rho": 0.05}],
}


class UsageError(DivPutError):
    pass


def fmt(v: float) -> str:
    return f"{float(v):.12g}"


def _scenario(path: Optional[str], seed: Optional[int] = None) -> Scenario:
    if path is None:
        sc = bundled("default")
    elif os.path.exists(path):
        sc = load_scenario(path)
    elif path in ("default", "coarse"):
        sc = bundled(path)
    else:
        raise ConfigInvalid(f"cannot read {path}: no such file")
    if seed is not None:
        sc.engine["seed"] = int(seed)
    return sc


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from None


def _surfaces(sc: Scenario, engine: str):
    if engine == "pde":
        return price_american_pde(sc.spec, sc.params, sc.schedule, grid=sc.grid(),
                                  stepping=sc.stepping(), scheme=sc.engine.get("scheme"))
    if engine == "tree":
        return price_american_tree(sc.spec, sc.params, sc.schedule,
                                   steps_per_segment=int(sc.engine["tree_steps"]), grid=sc.grid())
    raise UsageError(f"engine {engine!r} does not produce a value surface")


def boundary_csv(curve: BoundaryCurve) -> str:
    buf = io.StringIO()
    buf.write("t,c\n")
    for t, c in zip(curve.times, curve.levels):
        buf.write(f"{fmt(t)},{fmt(c)}\n")
    return buf.getvalue()


def full_boundary(sc: Scenario, engine: str = "pde") -> BoundaryCurve:
    surfaces = _surfaces(sc, engine)
    return BoundaryCurve.concatenate([extract_boundary(s, sc.spec) for s in surfaces])


def escrowed_boundary(sc: Scenario) -> BoundaryCurve:
    if sc.escrowed:
        amount, t_d = float(sc.escrowed["amount"]), float(sc.escrowed["date"])
    elif sc.schedule.count == 1 and sc.schedule.events[0].function.family == "constant":
        ev = sc.schedule.events[0]
        amount, t_d = float(ev.function.params["amount"]), ev.date
    else:
        raise UsageError("escrowed mode needs an 'escrowed' block or one constant dividend")
    sol = solve_escrowed(sc.spec, sc.params, amount, t_d, grid=sc.grid(), stepping=sc.stepping())
    return BoundaryCurve.concatenate([sol.boundary(), extract_boundary(sol.after, sc.spec)])


def cmd_price(args) -> int:
    sc = _scenario(args.config, args.seed)
    engine = args.engine or sc.engine["kind"]
    xs = args.x if args.x else [sc.spec.spot]
    ts = args.t if args.t else [0.0]
    rows = ["t,x,value"]
    if engine == "mc":
        for t in ts:
            n = aligned_steps(sc.spec.maturity, t, sc.schedule.dates, int(sc.checks["mc_steps"]))
            for x in xs:
                if t >= sc.spec.maturity:
                    v = max(sc.spec.strike - x, 0.0)
                else:
                    v = price_ls(sc.spec, sc.schedule, sc.params, x, t, int(sc.checks["mc_paths"]), n,
                                 seed=int(sc.engine["seed"])).value
                rows.append(f"{fmt(t)},{fmt(x)},{fmt(v)}")
    else:
        surfaces = _surfaces(sc, engine)
        for t in ts:
            if not 0 <= t <= sc.spec.maturity:
                raise UsageError(f"t={t:g} outside [0, T]")
            vals = surface_value(surfaces, t, np.asarray(xs, dtype=float))
            rows.extend(f"{fmt(t)},{fmt(x)},{fmt(v)}" for x, v in zip(xs, np.atleast_1d(vals)))
    _emit("\n".join(rows) + "\n", args.out)
    return 0


def cmd_boundary(args) -> int:
    sc = _scenario(args.config, args.seed)
    curve = escrowed_boundary(sc) if args.escrowed else full_boundary(sc, args.engine or "pde")
    _emit(boundary_csv(curve), args.out)
    return 0


def cmd_verify(args) -> int:
    sc = _scenario(args.config, args.seed)
    report = run_suite(sc)
    _emit(report.to_json() + "\n", args.out)
    if args.out not in (None, "-"):
        print(report.summary())
    if not report.overall:
        print("failing checks: " + ", ".join(report.failing()), file=sys.stderr)
        return 1
    return 0


def figure1_scenario(rho: float, n_log: Optional[int] = None, tree_steps: Optional[int] = None) -> Scenario:
    data = copy.deepcopy(FIGURE1)
    data["dividends"][0]["rho"] = float(rho)
    engine = {}
    if n_log:
        engine["grid"] = {"n_log": int(n_log)}
    if tree_steps:
        engine["tree_steps"] = int(tree_steps)
    data["engine"] = engine
    return scenario_from_dict(data, name="figure1")


def cmd_figure1(args) -> int:
    if args.rho_literal is not None:
        rho = args.rho_literal
    else:
        rho = 1.0 - args.dividend_fraction
    engine = args.engine or "tree"
    sc = figure1_scenario(rho, tree_steps=args.steps)
    curve = full_boundary(sc, engine)
    _emit(boundary_csv(curve), args.out)
    if engine == "tree":
        # step-count sensitivity: compare with half the steps on the same time samples
        half = figure1_scenario(rho, tree_steps=max(2, int(sc.engine["tree_steps"]) // 2))
        coarse = full_boundary(half, "tree")
        c_half = np.interp(curve.times, coarse.times, coarse.levels)
        diff = float(np.max(np.abs(curve.levels - c_half)))
        print(f"rho={fmt(rho)} steps={int(sc.engine['tree_steps'])} "
              f"max |c(N) - c(N/2)|={fmt(diff)}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="divput", description="American puts with discrete dividends")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, engines=("pde", "tree", "mc")):
        sp.add_argument("--config", help="scenario JSON file or bundled name (default, coarse)")
        sp.add_argument("--out", help="output file; stdout when omitted")
        sp.add_argument("--engine", choices=engines)
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("price", help="values at (t, x) points as CSV t,x,value")
    common(sp)
    sp.add_argument("-x", type=float, action="append", help="price point; repeatable")
    sp.add_argument("-t", type=float, action="append", help="time point; repeatable")
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("boundary", help="exercise boundary as CSV t,c")
    common(sp, ("pde", "tree"))
    sp.add_argument("--escrowed", action="store_true", help="use the escrowed-dividend model")
    sp.set_defaults(func=cmd_boundary)

    sp = sub.add_parser("verify", help="run the property suite and write its JSON report")
    common(sp)
    sp.add_argument("scenario", nargs="?", help="scenario file (same as --config)")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("figure1", help="boundary for K=100, T=4, one proportional dividend at 3.5")
    sp.add_argument("--out")
    sp.add_argument("--engine", choices=("pde", "tree"))
    sp.add_argument("--steps", type=int, help="tree steps per segment")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--rho-literal", type=float, help="retained fraction rho, D(x) = (1 - rho) x")
    g.add_argument("--dividend-fraction", type=float, help="paid fraction, rho = 1 - value")
    sp.set_defaults(func=cmd_figure1)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "scenario", None) and not args.config:
        args.config = args.scenario
    try:
        return args.func(args)
    except (ConfigInvalid, UsageError, DivPutError, ValueError, OSError) as exc:
        print(f"divput: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
