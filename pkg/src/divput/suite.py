"""Run every structural and asymptotic check on one scenario and collect a report."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .boundary import (BoundaryAtZero, InsufficientNodes, asymptotic_slope, check_bounds, default_window, extract_boundary,
                       smooth_contact)
from .closed_forms import perpetual_boundary
from .config import Scenario
from .dividends import inf_ratio
from .escrowed import no_exercise_window, solve_escrowed
from .invariants import surface_violations
from .lattice import price_american_tree
from .model import (BoundaryCurve, DividendEvent, DividendFunction, DividendSchedule,
                    OptionSpec, PriceGrid, TimeStepping, put_payoff, structural_flags,
                    validate_schedule)
from .montecarlo import DateNotOnStepGrid, price_ls
from .pde import pde_residual, price_american_pde, solve_segment_pde, surface_value


@dataclass
class CheckEntry:
    id: str
    property: str
    status: str  # pass | fail | skip | error
    measured: dict = field(default_factory=dict)
    threshold: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status in ("pass", "skip")


@dataclass
class CheckReport:
    scenario: str
    entries: List[CheckEntry]

    @property
    def overall(self) -> bool:
        return all(e.passed for e in self.entries)

    def failing(self) -> List[str]:
        return [e.id for e in self.entries if not e.passed]

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "overall": self.overall,
                "entries": [_rounded(e.__dict__) for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def summary(self) -> str:
        width = max(len(e.id) for e in self.entries) if self.entries else 10
        lines = [f"{'check':<{width}}  status  measured"]
        for e in self.entries:
            shown = ", ".join(f"{k}={_fmt(v)}" for k, v in e.measured.items() if not isinstance(v, (list, dict)))
            lines.append(f"{e.id:<{width}}  {e.status:<6}  {shown or e.message}")
        lines.append(f"overall: {'PASS' if self.overall else 'FAIL'}")
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _rounded(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _rounded(obj.item())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_rounded(v) for v in obj]
    return obj


class _Runner:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.entries: List[CheckEntry] = []
        self._cache: Dict[str, object] = {}
        self.grid_meta = {"engine": "pde", "n_nodes": sc.grid().size,
                          "n_log": sc.engine["grid"].get("n_log", 1200), **sc.engine["time_steps"]}

    def cached(self, key: str, make: Callable):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    def run(self, cid: str, prop: str, fn: Callable, grid: Optional[dict] = None):
        try:
            res = fn()
        except Exception as exc:  # engine errors are recorded, not raised
            self.entries.append(CheckEntry(cid, prop, "error", grid=grid or self.grid_meta,
                                           message=f"{type(exc).__name__}: {exc}"))
            return
        if res is None:
            self.entries.append(CheckEntry(cid, prop, "skip", grid=grid or self.grid_meta))
            return
        passed, measured, threshold = res
        self.entries.append(CheckEntry(cid, prop, "pass" if passed else "fail", measured,
                                       threshold, grid or self.grid_meta))

    def skip(self, cid: str, prop: str, why: str):
        self.entries.append(CheckEntry(cid, prop, "skip", grid=self.grid_meta, message=why))

    # solved objects ---------------------------------------------------------------------

    def pde(self, schedule: Optional[DividendSchedule] = None, stepping=None, key="main"):
        sc = self.sc
        sched = sc.schedule if schedule is None else schedule
        return self.cached("pde:" + key, lambda: price_american_pde(
            sc.spec, sc.params, sched, grid=sc.grid(), stepping=stepping or sc.stepping(),
            scheme=sc.engine.get("scheme")))

    def curves(self, surfaces, key="main") -> List[BoundaryCurve]:
        return self.cached("curves:" + key, lambda: [extract_boundary(s, self.sc.spec) for s in surfaces])


def _smooth_times(t_lo: float, t_hi: float, n: int, last_quarter: bool) -> np.ndarray:
    length = t_hi - t_lo
    if last_quarter:
        return t_hi - 0.25 * length + np.arange(n) * 0.25 * length / n
    return t_lo + np.arange(n) * length / n


def aligned_steps(maturity: float, t0: float, dates, n_min: int) -> int:
    """Smallest step count ``>= n_min`` placing every date on the simulation grid."""
    span = maturity - t0
    for n in range(n_min, 20 * n_min + 1):
        ok = all(abs((d - t0) / span * n - round((d - t0) / span * n)) < 1e-9 for d in dates if d > t0)
        if ok:
            return n
    raise DateNotOnStepGrid(f"no step count in [{n_min}, {20 * n_min}] fits the dividend dates")


def run_suite(sc: Scenario) -> CheckReport:
    R = _Runner(sc)
    spec, params, sched = sc.spec, sc.params, sc.schedule
    K, r = spec.strike, params.rate
    chk = sc.checks
    tol_inv = chk["invariant_tol"] * K
    all_prop = sched.count > 0 and all(e.function.family == "proportional" for e in sched.events)

    def main():
        return R.pde()

    def main_curves():
        return R.curves(main())

    # value-surface structure
    def invariants(surfaces, convex):
        worst = {}
        for s in surfaces:
            v = surface_violations(s, K).as_dict()
            for k2, val in v.items():
                worst[k2] = max(worst.get(k2, 0.0), val)
        keys = ["below_payoff", "above_strike", "increasing", "lipschitz"] + (["convexity"] if convex else [])
        return max(worst[k2] for k2 in keys) <= tol_inv, worst, {"max_violation": tol_inv, "convexity_checked": convex}

    R.run("surface_invariants", "payoff <= u <= K, u non-increasing and 1-Lipschitz in x"
          + (", convex in x" if all_prop else ""), lambda: invariants(main(), all_prop))

    def tree():
        return R.cached("tree", lambda: price_american_tree(spec, params, sched,
                                                            steps_per_segment=int(sc.engine["tree_steps"]),
                                                            grid=sc.grid()))

    tree_meta = {"engine": "tree", "steps_per_segment": int(sc.engine["tree_steps"])}
    R.run("tree_invariants", "tree surfaces: payoff <= u <= K, monotone and 1-Lipschitz in x",
          lambda: invariants(tree(), False), grid=tree_meta)

    # PDE residual decay
    def residual():
        t_lo = sched.dates[-1] if sched.count else 0.0
        base_n = int(chk["residual_n_log"])
        tail = OptionSpec(K, spec.maturity, spec.spot)
        st0 = sc.stepping()
        coarse = TimeStepping(4 * st0.dt_min, st0.growth, 4 * st0.dt_max)
        sups = []
        band = None
        for f in (1, 2):
            g = PriceGrid.build(K, spec.spot, n_log=base_n * f)
            if band is None:
                band = 3.0 * float(g.cell_at(K))
            st = coarse if f == 1 else coarse.refined(2)
            s = solve_segment_pde(put_payoff(K), t_lo, spec.maturity, g, st, tail, params)
            sups.append(pde_residual(s, params, tail, band=band).sup)
        ratio = sups[0] / sups[1]
        return ratio >= chk["residual_ratio"], {"sup_coarse": sups[0], "sup_fine": sups[1], "ratio": ratio}, \
            {"min_ratio": chk["residual_ratio"]}

    R.run("pde_residual_decay", "continuation-region residual shrinks under grid refinement", residual,
          grid={"engine": "pde", "n_log": [chk["residual_n_log"], 2 * chk["residual_n_log"]]})

    # no-dividend part of the boundary
    def perpetual():
        c = main_curves()[0]
        m = c.times < spec.maturity
        lim = perpetual_boundary(K, params)
        margin = c.levels[m] - (lim - c.cells[m])
        return bool(np.all(margin >= 0)), {"min_c": float(np.min(c.levels[m]))}, {"perpetual_boundary": lim}

    R.run("perpetual_lower_bound", "boundary after the last dividend stays above the perpetual boundary", perpetual)

    n_sc = int(chk["smooth_contact_samples"])

    def contact(seg_index, last_quarter):
        s = main()[seg_index]
        c = main_curves()[seg_index]
        ts = _smooth_times(s.t_lo, s.t_hi, n_sc, last_quarter)
        try:
            errs = [abs(smooth_contact(s, c, t, K) + 1.0) for t in ts]
        except (BoundaryAtZero, InsufficientNodes) as exc:
            return False, {"max_error": math.inf, "reason": str(exc)}, {"max_error": chk["smooth_contact"]}
        return max(errs) <= chk["smooth_contact"], {"max_error": max(errs), "times": list(ts)}, \
            {"max_error": chk["smooth_contact"]}

    R.run("smooth_contact_final", "d/dx u(t, c(t)+) = -1 after the last dividend", lambda: contact(0, False))

    if sched.count == 0:
        for cid in ("jump_condition", "boundary_positive", "limit_zero", "asymptotic_slope",
                    "dividend_bounds", "smooth_contact_pre", "segment_consistency", "identity_ordering"):
            R.skip(cid, "dividend-specific", "no dividends in scenario")

    for j, ev in enumerate(sched.latest_first()):
        tag = f"[{ev.date:g}]"
        flags = structural_flags(ev.function)
        seg = j + 1
        t_lo = sched.events[sched.count - 2 - j].date if seg < sched.count else 0.0

        def jump(ev=ev, seg=seg):
            fine = R.pde(stepping=sc.stepping().refined(2), key="fine")
            gaps = []
            for surfs in (main(), fine):
                pre = surfs[seg]
                g = pre.meta["terminal"]
                gaps.append(float(np.max(np.abs(pre.values[1] - g(pre.x)))))
            ratio = gaps[1] / gaps[0] if gaps[0] > 0 else 0.0
            return ratio <= chk["jump_ratio"], {"gap_dt": gaps[0], "gap_dt_half": gaps[1], "ratio": ratio}, \
                {"max_ratio": chk["jump_ratio"]}

        R.run("jump_condition" + tag, "u(t_d-, x) -> u(t_d, x - D(x)) as the step shrinks", jump)

        def positive(seg=seg, ev=ev):
            c = main_curves()[seg].window(-math.inf, ev.date)
            return bool(np.all(c.levels > 0)), {"min_c": float(np.min(c.levels))}, {"min_c": 0.0}

        R.run("boundary_positive" + tag, "boundary strictly positive before the dividend", positive)

        if flags.positive and flags.concave:
            def limit(seg=seg, ev=ev):
                c = main_curves()[seg].ascending().window(-math.inf, ev.date)
                cell0 = float(main()[seg].grid.cell_at(0.0))
                delta = ev.date - float(c.times[-1])
                lim = 2 * cell0 + r * K * inf_ratio(ev.function) * delta
                return c.levels[-1] <= lim, {"last_c": float(c.levels[-1]), "delta": delta}, {"max_last_c": lim}
            R.run("limit_zero" + tag, "c(t) -> 0 as t -> t_d-", limit)

            def slope(seg=seg, ev=ev, t_lo=t_lo):
                c = main_curves()[seg]
                fit = asymptotic_slope(c, ev.date, default_window(ev.date, t_lo, sc.stepping().dt_min))
                target = r * K * inf_ratio(ev.function)
                rel = abs(fit.slope / target - 1.0)
                return rel <= chk["slope_rel"], {"slope": fit.slope, "target": target, "rel_error": rel,
                                                 "r2": fit.r2}, {"max_rel_error": chk["slope_rel"]}
            R.run("asymptotic_slope" + tag, "c(t) ~ r K mu (t_d - t)", slope)
        else:
            R.skip("limit_zero" + tag, "c(t) -> 0 as t -> t_d-", "dividend not positive concave")
            R.skip("asymptotic_slope" + tag, "c(t) ~ r K mu (t_d - t)", "dividend not positive concave")

        def bounds(seg=seg, ev=ev, t_lo=t_lo):
            c = main_curves()[seg]
            c_bar = float(main_curves()[seg - 1].ascending().levels[0])
            res = check_bounds(c, spec, params, sched, t_d=ev.date, c_bar_td=c_bar, t_lo=t_lo,
                               slope_margin=chk["slope_rel"], dt=sc.stepping().dt_min)
            return res

        try:
            results = bounds()
        except Exception as exc:
            R.entries.append(CheckEntry("dividend_bounds" + tag, "bounds near t_d", "error",
                                        grid=R.grid_meta, message=f"{type(exc).__name__}: {exc}"))
            results = []
        for b in results:
            if b.passed is None:
                R.skip(b.name + tag, b.name.replace("_", " "), b.detail.get("reason", ""))
            else:
                R.entries.append(CheckEntry(b.name + tag, b.name.replace("_", " "),
                                            "pass" if b.passed else "fail",
                                            {"margin": b.margin, **{k: v for k, v in b.detail.items()}},
                                            {}, R.grid_meta))

        if flags.linear_near_zero:
            R.run("smooth_contact_pre" + tag, "d/dx u(t, c(t)+) = -1 late in the pre-dividend segment",
                  lambda seg=seg: contact(seg, True))
        else:
            R.skip("smooth_contact_pre" + tag, "smooth contact", "dividend not linear near zero")

    if sched.count:
        def consistency():
            reduced = DividendSchedule(sched.events[1:], sched.flags[1:] if sched.flags else None)
            red = R.pde(reduced, key="reduced")
            red_c = R.curves(red, key="reduced")
            worst = 0.0
            ok = True
            for a, b in zip(main_curves()[:len(red_c)], red_c):
                # the reduced problem's earliest segment starts at 0, so match samples by time
                common, ia, ib = np.intersect1d(np.round(a.times, 12), np.round(b.times, 12),
                                                return_indices=True)
                d = np.abs(a.levels[ia] - b.levels[ib])
                ok &= bool(common.size > 0 and np.all(d <= np.maximum(a.cells[ia], b.cells[ib])))
                worst = max(worst, float(np.max(d)) if d.size else math.inf)
            return ok, {"max_boundary_gap": worst, "segments_compared": len(red_c)}, {"max_gap": "one grid cell"}

        R.run("segment_consistency", "later segments equal the problem with one dividend fewer", consistency)

        def identity():
            ident = DividendSchedule(tuple(DividendEvent(e.date, DividendFunction.identity()) for e in sched.events))
            ident = validate_schedule(ident, spec)
            ids = R.pde(ident, key="identity")
            idc = R.curves(ids, key="identity")
            worst_u, worst_c = 0.0, 0.0
            for a, b, ca, cb in zip(main()[1:], ids[1:], main_curves()[1:], idc[1:]):
                worst_u = max(worst_u, float(np.max(a.values - b.values)))
                worst_c = max(worst_c, float(np.max(cb.levels[1:] - ca.levels[1:] - ca.cells[1:])))
            ok = worst_u <= tol_inv and worst_c <= 0
            return ok, {"max_u_excess": worst_u, "max_c_shortfall": worst_c}, {"max_u_excess": tol_inv}

        R.run("identity_ordering", "u_D <= u_identity and c_D >= c_identity", identity)

    def cross():
        pts = np.array(chk["cross_engine_points"]) * K
        a = surface_value(main(), 0.0, pts)
        b = surface_value(tree(), 0.0, pts)
        diff = float(np.max(np.abs(a - b)))
        return diff <= chk["cross_engine_rel"] * K, {"max_abs_diff": diff, "pde": list(a), "tree": list(b)}, \
            {"max_abs_diff": chk["cross_engine_rel"] * K}

    R.run("cross_engine_tree", "PDE and tree agree at t = 0", cross, grid={**R.grid_meta, **tree_meta})

    def mc():
        n = aligned_steps(spec.maturity, 0.0, sched.dates, int(chk["mc_steps"]))
        est = price_ls(spec, sched, params, spec.spot, 0.0, int(chk["mc_paths"]), n, 3,
                       seed=int(sc.engine["seed"]))
        ref = surface_value(main(), 0.0, spec.spot)
        lim = max(chk["mc_sigmas"] * est.stderr, chk["mc_rel"] * K)
        return abs(est.value - ref) <= lim, {"mc": est.value, "stderr": est.stderr, "pde": ref,
                                            "steps": n}, {"max_abs_diff": lim}

    R.run("mc_agreement", "Longstaff-Schwartz agrees with the PDE at the spot", mc,
          grid={"engine": "mc", "paths": int(chk["mc_paths"]), "seed": int(sc.engine["seed"])})

    if sc.escrowed:
        def escrow():
            amount = float(sc.escrowed["amount"])
            t_d = float(sc.escrowed["date"])
            sol = solve_escrowed(spec, params, amount, t_d, grid=sc.grid(), stepping=sc.stepping())
            window = no_exercise_window(spec, amount, params)
            c = sol.boundary()
            delta = t_d - c.times
            steps = np.abs(np.diff(c.times))
            inside = delta < window - float(np.max(steps))
            zero_ok = bool(np.all(c.levels[inside] == 0))
            const = validate_schedule(DividendSchedule.of((t_d, DividendFunction.constant(amount))), spec)
            cc = extract_boundary(price_american_pde(spec, params, const, grid=sc.grid(),
                                                     stepping=sc.stepping())[1], spec)
            cc = cc.window(-math.inf, t_d)
            pos_ok = bool(np.all(cc.levels > 0))
            first = float(np.min(delta[c.levels > 0])) if np.any(c.levels > 0) else math.inf
            return zero_ok and pos_ok, {"window": window, "first_positive_delta": first,
                                        "max_c_inside": float(np.max(c.levels[inside])),
                                        "dividend_model_min_c": float(np.min(cc.levels))}, \
                {"zero_inside_window": True, "positive_dividend_model": True}

        R.run("escrowed_window", "escrowed boundary vanishes on the no-exercise window", escrow)

    return CheckReport(sc.name, R.entries)
