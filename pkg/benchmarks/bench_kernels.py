"""Compare the compiled kernels against the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py [--repeat R]``. Kernel timings
call both modules directly; the end-to-end row runs a regularized forward
solve in a subprocess per backend so the import-time selection is exercised.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hystrol import _kernels_py

try:
    from hystrol import _kernels
except ImportError:
    _kernels = None

END_TO_END = """
import time
from hystrol.problem import make_system
from hystrol.dynamics import solve_state_regularized
from hystrol._backend import NAME
s = make_system(n=64, m=2, steps=2000)
u = s.zero_control()
u = u.like(u.values + 3.0 * s.mask)
t0 = time.perf_counter()
solve_state_regularized(u, s, 1e-3)
print(NAME, time.perf_counter() - t0)
"""


def kernel_cases(size):
    rng = np.random.default_rng(0)
    v = np.cumsum(rng.normal(scale=0.05, size=size))
    h = rng.normal(size=size)
    c = np.full(size - 1, 1.0 / (size * 1e-3))
    k = 66
    lower = np.full((2, k), -1.0)
    upper = np.full((2, k), -1.0)
    diag = np.full((2, k), 3.0)
    rhs = rng.normal(size=(2, k))
    z = np.clip(v, -1, 1)
    return {
        "stop_clamp": lambda m: m.stop_clamp(v, -1.0, 1.0, 0.0),
        "stop_derivative": lambda m: m.stop_derivative(v, h, -1.0, 1.0, 0.0, 1e-12),
        "reg_stop": lambda m: m.reg_stop(v, c, -1.0, 1.0, 0.0, 1e-12),
        "reg_stop_derivative": lambda m: m.reg_stop_derivative(h, z, c, -1.0, 1.0),
        "thomas_solve x1000": lambda m: [m.thomas_solve(lower, *m.thomas_factor(lower, diag, upper), rhs)
                                         for _ in range(1000)],
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def end_to_end(backend):
    env = dict(os.environ, HYSTROL_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.split()[1])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--size", type=int, default=20000)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
        return 1
    print(f"{'kernel':<24}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, fn in kernel_cases(args.size).items():
        slow = best_of(lambda: fn(_kernels_py), args.repeat)
        fast = best_of(lambda: fn(_kernels), args.repeat)
        print(f"{name:<24}{slow:>12.4f}{fast:>12.4f}{slow / fast:>10.1f}")
    slow, fast = end_to_end("python"), end_to_end("cython")
    print(f"{'solve_state_regularized':<24}{slow:>12.4f}{fast:>12.4f}{slow / fast:>10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
