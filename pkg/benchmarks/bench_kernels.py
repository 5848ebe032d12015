"""Compare the compiled and numpy kernels on PDE-sized PSOR solves and a tree sweep.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from divput import kernels
from divput.lattice import crr_parameters
from divput.model import MarketParams, PriceGrid
from divput.pde import operator_coefficients


def psor_case(n_log=1200, dt=0.005):
    params = MarketParams(0.04, 0.3)
    x = PriceGrid.build(100.0, n_log=n_log).nodes
    lo, di, up = operator_coefficients(x, params)  # interior nodes only
    # one Crank-Nicolson step from the payoff
    th = 0.5
    lower, diag, upper = -th * dt * lo, 1.0 - th * dt * di, -th * dt * up
    psi = np.maximum(100.0 - x[1:-1], 0.0)
    v = np.maximum(100.0 - x, 0.0)
    rhs = (1 + (1 - th) * dt * di) * v[1:-1] + (1 - th) * dt * (lo * v[:-2] + up * v[2:])
    rhs[0] -= lower[0] * 100.0
    lower[0] = 0.0
    upper[-1] = 0.0
    return [np.ascontiguousarray(a, dtype=float) for a in (lower, diag, upper, rhs, psi)]


def time_psor(mod, args, repeat):
    best = np.inf
    for _ in range(repeat):
        u = args[4].copy()
        t0 = time.perf_counter()
        it = mod.psor(*args, u, 1.2, 1e-7, 10000)
        best = min(best, time.perf_counter() - t0)
    return best, it, u


def time_tree(mod, steps, repeat):
    up, p, disc = crr_parameters(1.0 / steps, MarketParams(0.04, 0.3))
    width = 801
    j = np.arange(-steps - 400, steps + 401)
    prices = 100.0 * up ** j
    psi = np.maximum(100.0 - prices, 0.0)
    rec = np.arange(0, steps + 1, max(1, steps // 100), dtype=np.int64)
    best = np.inf
    for _ in range(repeat):
        v = psi.copy()
        t0 = time.perf_counter()
        out = mod.tree_backward(v, psi, p, disc, steps, rec, steps, width, True)
        best = min(best, time.perf_counter() - t0)
    return best, out[-1]


END_TO_END = """
import time
from divput import MarketParams, OptionSpec, PriceGrid, price_american_pde, price_american_tree, kernels
spec, p = OptionSpec(100.0, 1.0, 100.0), MarketParams(0.04, 0.3)
g = PriceGrid.build(100.0, 100.0, n_log=1200)
t0 = time.perf_counter(); price_american_pde(spec, p, grid=g); t1 = time.perf_counter()
price_american_tree(spec, p, steps_per_segment=2000, grid=g); t2 = time.perf_counter()
print(kernels.BACKEND, t1 - t0, t2 - t1)
"""


def end_to_end(pure):
    env = dict(os.environ, DIVPUT_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    return out[0], float(out[1]), float(out[2])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=2000)
    a = ap.parse_args()
    py = kernels.backend("python")
    try:
        cy = kernels.backend("cython")
    except ImportError:
        cy = None
        print("compiled extension not built; timing the numpy fallback only")
    args = psor_case()
    rows = []
    t_py, it_py, u_py = time_psor(py, args, a.repeat)
    rows.append(("psor (1 CN step, %d nodes)" % args[0].size, t_py, None, None))
    t_tp, v_py = time_tree(py, a.steps, a.repeat)
    rows.append((f"tree_backward ({a.steps} steps)", t_tp, None, None))
    if cy is not None:
        t_cy, it_cy, u_cy = time_psor(cy, args, a.repeat)
        rows[0] = (rows[0][0], t_py, t_cy, float(np.max(np.abs(u_py - u_cy))))
        t_tc, v_cy = time_tree(cy, a.steps, a.repeat)
        rows[1] = (rows[1][0], t_tp, t_tc, float(np.max(np.abs(v_py - v_cy))))
        print(f"psor sweeps: python {it_py}, cython {it_cy}")
    print(f"{'kernel':<34}{'python [s]':>12}{'cython [s]':>12}{'speed-up':>10}{'max diff':>11}")
    for name, tp, tc, diff in rows:
        if tc is None:
            print(f"{name:<34}{tp:>12.4f}{'-':>12}{'-':>10}{'-':>11}")
        else:
            print(f"{name:<34}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x{diff:>11.2e}")
    print("\nend to end, no-dividend put, T = 1, 1200 log nodes")
    runs = {name: (pde, tree) for name, pde, tree in (end_to_end(True), end_to_end(False))}
    for label, k in (("PDE solve", 0), ("tree, 2000 steps", 1)):
        py_t = runs["python"][k]
        cy_t = runs.get("cython", (None, None))[k]
        extra = f"{cy_t:>12.3f}{py_t / cy_t:>9.1f}x" if cy_t else f"{'-':>12}{'-':>10}"
        print(f"{label:<34}{py_t:>12.3f}" + extra)


if __name__ == "__main__":
    main()
