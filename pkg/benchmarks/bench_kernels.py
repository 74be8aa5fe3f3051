"""Compare the compiled and pure-Python field kernels.

Run from the repository root::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best wall time per call for each backend and the speed-up.
"""

from __future__ import annotations

import argparse
import random
import sys
import timeit

from consensus_cert import _pykernels
from consensus_cert.field import Q

try:
    from consensus_cert import _ckernels
except ImportError:
    _ckernels = None


def cases(rng: random.Random):
    # a node with c children evaluating the batched deterministic round at size n
    for n, c in ((16, 2), (64, 4), (256, 8), (1024, 8)):
        points = list(range(n + 1))
        children = [[(rng.randrange(Q), rng.randrange(Q)) for _ in points] for _ in range(c)]
        a, b = rng.randrange(Q), rng.randrange(Q)
        yield f"set_equality_batch n={n} children={c}", (
            lambda impl, p=points, a=a, b=b, ch=children: impl.set_equality_batch(p, a, b, ch)
        )
    factors = [rng.randrange(Q) for _ in range(10_000)]
    yield "mul_fold 10k factors", lambda impl, f=factors: impl.mul_fold(3, f)


def best(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    loops, _ = timer.autorange()
    return min(timer.repeat(repeat, loops)) / loops


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the pure backend is available", file=sys.stderr)
    print(f"{'case':<40}{'python':>12}{'cython':>12}{'speed-up':>10}")
    for label, fn in cases(random.Random(args.seed)):
        py = best(lambda: fn(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{label:<40}{py * 1e6:>10.1f}us{'-':>12}{'-':>10}")
            continue
        if fn(_ckernels) != fn(_pykernels):
            raise SystemExit(f"backends disagree on {label}")
        cy = best(lambda: fn(_ckernels), args.repeat)
        print(f"{label:<40}{py * 1e6:>10.1f}us{cy * 1e6:>10.1f}us{py / cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
