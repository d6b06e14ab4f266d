"""Time each kernel under the compiled and pure-Python backends.

    python3 benchmarks/bench_kernels.py [--size N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from fnrseg import _backend
from fnrseg.rng import _expand_seed


def cases(size):
    rng = np.random.default_rng(0)
    values = np.sort(rng.random(size))
    state = np.array(_expand_seed(12345), dtype=np.uint64)
    return {
        "xoshiro_fill_uniform": lambda k: k(state.copy(), np.empty(size)),
        "xoshiro_fill_u64": lambda k: k(state.copy(), np.empty(size, dtype=np.uint64)),
        "xoshiro_permutation": lambda k: k(state.copy(), size),
        "count_at_least": lambda k: k(values, 0.5),
        "bisect_critical": lambda k: k(values, 0.1, 1e-4),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=32**3, help="elements per call (default one 32^3 volume)")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = _backend.available()
    if "compiled" not in backends:
        print("compiled kernels not built; timing the Python backend only")
    print(f"{'kernel':<22}" + "".join(f"{b:>14}" for b in backends) + ("  speedup" if len(backends) > 1 else ""))
    for name, call in cases(args.size).items():
        row = {}
        for b in backends:
            with _backend.backend(b):
                fn = _backend.kernel(name)
                number = 1 if b == "python" else 20
                best = min(timeit.repeat(lambda: call(fn), number=number, repeat=args.repeat)) / number
            row[b] = best
        line = f"{name:<22}" + "".join(f"{row[b] * 1e3:>12.3f}ms" for b in backends)
        if len(backends) > 1:
            line += f"  {row['python'] / row['compiled']:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
