"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--zones 18] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from modalgame import _pykernels
from modalgame.scenario import random_scenario
from modalgame.strategies import TransitStrategy
from modalgame.tnc import TncContext

try:
    from modalgame import _ckernels
except ImportError:
    _ckernels = None


def setup(m, seed=0):
    s = random_scenario(seed, n_zones=m, n_classes=3)
    rng = np.random.default_rng(seed)
    ctx = TncContext(s, TransitStrategy(1.0, rng.uniform(2, 10, s.network.n_lines)))
    b, r, w = 5.0, rng.uniform(0.5, 3, m), rng.uniform(0.02, 0.2, m)
    ones = np.ones(m)
    obj = (ctx.lam0, ctx.base, ctx.la, ctx.d, ctx.alpha, ctx.gamma, ctx.eps, ctx.c_av, ctx.v_a, b, r, w, ones, ones, True)
    o, c = np.arange(m // 2), np.arange(m // 2, m)
    grid = (
        np.ascontiguousarray(ctx.lam0[np.ix_(o, c)]), np.ascontiguousarray(ctx.base[np.ix_(o, c)]),
        np.ascontiguousarray(ctx.la[np.ix_(o, c)]), ctx.d[o].copy(), ctx.d[c].copy(),
        ctx.alpha, ctx.gamma, ctx.eps, ctx.c_av, ctx.v_a, b, r[c].copy(), w[c].copy(),
        rng.uniform(0.1, 5, (len(o), 64)), rng.uniform(0.01, 0.5, (len(o), 64)),
    )
    return obj, grid


def best_of(fn, args, repeat):
    n, _ = timeit.Timer(lambda: fn(*args)).autorange()
    return min(timeit.repeat(lambda: fn(*args), number=n, repeat=repeat)) / n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--zones", type=int, nargs="+", default=[4, 8, 18])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<16}{'zones':>6}{'numpy us':>12}{'cython us':>12}{'speedup':>9}")
    for m in args.zones:
        obj, grid = setup(m)
        for name, a in (("tnc_objective", obj), ("origin_grid", grid)):
            t_py = best_of(getattr(_pykernels, name), a, args.repeat)
            if _ckernels is None:
                print(f"{name:<16}{m:>6}{t_py * 1e6:>12.1f}{'-':>12}{'-':>9}")
                continue
            t_cy = best_of(getattr(_ckernels, name), a, args.repeat)
            print(f"{name:<16}{m:>6}{t_py * 1e6:>12.1f}{t_cy * 1e6:>12.1f}{t_py / t_cy:>8.1f}x")
    end_to_end()


E2E = """
import time, modalgame
from modalgame.equilibrium import best_response_iterate, default_initial_strategies
from modalgame.scenario import two_zone_scenario
from modalgame.synthetic import synthesize_sf_scenario
from modalgame.tnc import solve_tnc_best_response
s = synthesize_sf_scenario(0)
_, tr = default_initial_strategies(s)
t = time.perf_counter(); solve_tnc_best_response(tr, s); a = time.perf_counter() - t
s = two_zone_scenario()
t = time.perf_counter(); best_response_iterate(*default_initial_strategies(s), s); b = time.perf_counter() - t
print(modalgame.BACKEND, a, b)
"""


def end_to_end():
    # each backend in its own interpreter, since the choice is made at import
    import os
    import subprocess
    import sys

    print(f"\n{'backend':<10}{'SF TNC best response s':>24}{'two-zone equilibrium s':>24}")
    for flag in ("0", "1"):
        env = dict(os.environ, MODALGAME_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        name, a, b = out.stdout.split()
        print(f"{name:<10}{float(a):>24.3f}{float(b):>24.3f}")


if __name__ == "__main__":
    main()
