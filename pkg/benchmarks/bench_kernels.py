"""Compare the compiled Euler kernel against the numpy fallback.

    python benchmarks/bench_kernels.py [--size 240x320] [--steps 500] [--repeat 3]

Both backends are imported directly, so one process times both.  Results
are also checked for bit-identical output.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from cenntrack import _fallback
from cenntrack.templates import diffusion, recall, shadow

try:
    from cenntrack import _kernels
except ImportError:  # extension not built
    _kernels = None


def _time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", default="240x320", help="HxW of the grid")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    H, W = (int(v) for v in args.size.lower().split("x"))
    rng = np.random.default_rng(0)
    state = rng.uniform(-1, 1, (1, H, W))
    bias = rng.uniform(-1, 1, (1, H, W))
    cases = [("diffusion (zero flux)", diffusion(None).feedback, False, 0.0),
             ("shadow (fixed low)", shadow("left").feedback, True, -1.0),
             ("recall (fixed low)", recall().feedback, True, -1.0)]
    print(f"grid {H}x{W}, {args.steps} Euler steps, best of {args.repeat}")
    print(f"{'template':24s} {'python (s)':>11s} {'compiled (s)':>13s} {'speedup':>8s} identical")
    for name, fb, fixed, bval in cases:
        t_py, out_py = _time(lambda: _fallback.euler(state, bias, fb, 0.1, args.steps, fixed, bval),
                           args.repeat)
        if _kernels is None:
            print(f"{name:24s} {t_py:11.3f} {'n/a':>13s}")
            continue
        t_c, out_c = _time(lambda: np.asarray(_kernels.euler(state, bias, fb, 0.1, args.steps, fixed, bval)),
                         args.repeat)
        same = np.array_equal(out_py, out_c)
        print(f"{name:24s} {t_py:11.3f} {t_c:13.3f} {t_py / t_c:7.1f}x {same}")


if __name__ == "__main__":
    main()
