"""Time the compiled mapping-table kernels against the pure-Python ones.

Usage: python benchmarks/bench_kernels.py [--rows N] [--width W] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from sparqlopt import _kernels_py

try:
    from sparqlopt import _ckernels
except ImportError:
    _ckernels = None


def table(rng, rows, width, values):
    t = rng.integers(-1, values, size=(rows, width)).astype(np.intc)
    return np.ascontiguousarray(t)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=400)
    ap.add_argument("--width", type=int, default=4)
    ap.add_argument("--values", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    left = table(rng, args.rows, args.width, args.values)
    right = table(rng, args.rows, args.width, args.values)
    impls = [("python", _kernels_py)]
    if _ckernels is None:
        print("compiled kernels not built; timing the fallback only")
    else:
        impls.append(("cython", _ckernels))
        a = sorted(map(tuple, _kernels_py.join_rows(left, right).tolist()))
        b = sorted(map(tuple, _ckernels.join_rows(left, right).tolist()))
        assert a == b, "join_rows backends disagree"
        assert (_kernels_py.minus_mask(left, right) == _ckernels.minus_mask(left, right)).all()
    print(f"tables {args.rows}x{args.width}, values in [-1, {args.values})")
    base = {}
    for kernel in ("join_rows", "minus_mask"):
        for name, mod in impls:
            fn = getattr(mod, kernel)
            best = min(timeit.repeat(lambda: fn(left, right), number=1, repeat=args.repeat))
            base.setdefault(kernel, best)
            print(f"{kernel:11s} {name:7s} {best * 1e3:9.2f} ms  x{base[kernel] / best:6.1f}")


if __name__ == "__main__":
    main()
