"""Time the compiled Euler kernel against the pure-Python fallback.

    python3 benchmarks/bench_euler.py [--steps 200000] [--dims 1,3] [--repeat 3]

Both kernels are fed identical tables and noise, so the script also checks
that their outputs agree bit for bit.
"""
import argparse
import time

import numpy as np

from cslim import _euler_py
from cslim.simulate import (
    BLOWUP_LIMIT,
    RandomStream,
    random_stable_system,
    sinusoidal_system,
    step_tables,
)

try:
    from cslim import _euler
except ImportError:
    _euler = None


def _inputs(n, steps, dt=0.002):
    A, Q = random_stable_system(n, RandomStream(0, n)) if n > 1 else ([[-1.0]], [[1.0]])
    drift, noise = step_tables(sinusoidal_system(A, 0.2, Q, 0.3), dt)
    xi = np.random.default_rng(n).standard_normal((steps, n))
    return drift, noise, xi


def _run(kernel, drift, noise, xi, stride):
    n = drift.shape[1]
    x = np.zeros(n)
    out = np.empty((xi.shape[0] // stride + 1, n))
    out[0] = x
    start = time.perf_counter()
    bad = kernel.euler_chunk(drift, noise, x, xi, 0, 0, stride, out, BLOWUP_LIMIT)
    return time.perf_counter() - start, out, bad


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--dims", default="1,3")
    ap.add_argument("--stride", type=int, default=5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    kernels = [("python", _euler_py)] + ([("compiled", _euler)] if _euler else [])
    if _euler is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'n':>3} {'kernel':>9} {'best s':>9} {'Msteps/s':>9}")
    for n in (int(v) for v in args.dims.split(",")):
        drift, noise, xi = _inputs(n, args.steps)
        outs = {}
        for name, kernel in kernels:
            best = min(_run(kernel, drift, noise, xi, args.stride)[0] for _ in range(args.repeat))
            outs[name] = _run(kernel, drift, noise, xi, args.stride)[1]
            print(f"{n:>3} {name:>9} {best:>9.4f} {args.steps / best / 1e6:>9.2f}")
        if len(outs) == 2:
            same = np.array_equal(outs["python"], outs["compiled"])
            print(f"{n:>3} {'identical':>9} {same}")


if __name__ == "__main__":
    main()
