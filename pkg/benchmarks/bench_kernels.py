"""Compare the compiled and numpy world-evaluation kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are run on the same packed model; outputs are checked for equality
before any timing is reported.
"""

import argparse
import sys
import timeit

import numpy as np

from cfid import _kernels_py
from cfid.graph import parse_graph
from cfid.oracle import random_scm

try:
    from cfid import _kernels
except ImportError:  # extension not built
    _kernels = None

CASES = [
    ("fig1a, 2^6 states", "X -> W\nW -> Y\nD -> Z\nZ -> Y\nX <-> Y\n", 2, 2),
    ("fig1a, 3^6 states", "X -> W\nW -> Y\nD -> Z\nZ -> Y\nX <-> Y\n", 3, 3),
    ("8-node chain, 2^16 states", "".join(f"V{i} -> V{i + 1}\n" for i in range(7)) + "V0 <-> V7\nV1 <-> V6\nV2 <-> V5\nV3 <-> V4\nV0 <-> V4\nV2 <-> V7\nV1 <-> V3\nV5 <-> V6\n", 2, 2),
    ("8-node chain, 3^12 states", "".join(f"V{i} -> V{i + 1}\n" for i in range(7)) + "V0 <-> V7\nV1 <-> V6\nV2 <-> V5\nV3 <-> V4\n", 3, 3),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'case':28} {'states':>8} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for label, text, dom, exo in CASES:
        M = random_scm(parse_graph(text), seed=0, domain_sizes=dom, exo_size=exo)
        names, _, packed = M._packed()
        fixed = np.full(len(names), -1, dtype=np.int32)
        fixed[0] = 1
        a = _kernels_py.evaluate_world(M.n_states, fixed=fixed, **packed)
        b = _kernels.evaluate_world(M.n_states, fixed=fixed, **packed)
        if not np.array_equal(a, b):
            print(f"{label}: backends disagree")
            return 1
        times = {}
        for name, fn in (("py", _kernels_py.evaluate_world), ("cy", _kernels.evaluate_world)):
            t = timeit.repeat(lambda fn=fn: fn(M.n_states, fixed=fixed, **packed), number=1, repeat=args.repeat)
            times[name] = min(t) * 1e3
        print(f"{label:28} {M.n_states:>8} {times['py']:>10.3f} {times['cy']:>10.3f} {times['py'] / times['cy']:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
