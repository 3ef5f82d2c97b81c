"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--M 64] [--N 3] [--repeat 5]

Prints one line per kernel and backend with the best wall time, and the
largest elementwise disagreement between the backends.
"""
import argparse
import timeit

import numpy as np

from wavemarg._kernels import available_backends


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--M", type=int, default=64, help="nodes per axis (d = 1)")
    parser.add_argument("--N", type=int, default=3, help="particle count")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(0)
    phi = rng.random(args.M ** args.N)
    t = rng.random(args.M) * 0.5
    field = phi.reshape((args.M,) * args.N)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; timing the numpy fallback only")
    results = {}
    for name, mod in backends.items():
        for kernel, call in (
                ("realloc_sweep", lambda: mod.realloc_sweep(phi, t, args.N)),
                ("grad_sq_sum", lambda: mod.grad_sq_sum(field))):
            best = min(timeit.repeat(call, number=1, repeat=args.repeat))
            results[(kernel, name)] = (best, call())
            print(f"{kernel:14s} {name:7s} {best * 1e3:9.3f} ms")

    if "cython" in backends:
        for kernel in ("realloc_sweep", "grad_sq_sum"):
            py_t, py_out = results[(kernel, "python")]
            cy_t, cy_out = results[(kernel, "cython")]
            py_out = py_out if isinstance(py_out, tuple) else (py_out,)
            cy_out = cy_out if isinstance(cy_out, tuple) else (cy_out,)
            gap = max(float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
                      for a, b in zip(py_out, cy_out))
            print(f"{kernel:14s} speedup {py_t / cy_t:6.2f}x  max gap {gap:.2e}")


if __name__ == "__main__":
    main()
