"""Compare the compiled and numpy trilinear TSDF kernels.

    python benchmarks/bench_kernels.py --points 200000 --repeat 5

Prints per-backend best-of-N timings and checks both return the same numbers.
"""
import argparse
import math
import time

import numpy as np

from placesynth.geometry import Pose, build_tsdf
from placesynth.shapes import box_surface
from placesynth._kernels import _fallback

try:
    from placesynth._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def random_grid(rng, n_boxes=10, voxel=0.01):
    clouds = [Pose([*rng.uniform(-0.25, 0.25, 2), 0.0], rng.uniform(-math.pi, math.pi))
              .apply(box_surface(rng.uniform(0.03, 0.12, 3))) for _ in range(n_boxes)]
    return build_tsdf(clouds, voxel, 0.05, 0.1)


def best_time(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    grid = random_grid(rng)
    pts = rng.uniform(grid.origin - 0.02, grid.upper + 0.02, size=(args.points, 3))
    call = (grid.values, grid.origin, float(grid.voxel_size), float(grid.truncation), pts)

    backends = {"python": _fallback.trilinear}
    if _ckernels is not None:
        backends["cython"] = _ckernels.trilinear
    else:
        print("compiled kernels not available; timing the numpy fallback only")

    print(f"grid {grid.dims}, {args.points} query points, best of {args.repeat}")
    times = {}
    for name, fn in backends.items():
        times[name] = best_time(lambda: fn(*call), args.repeat)
        print(f"  {name:>7}: {times[name] * 1e3:8.2f} ms  ({args.points / times[name] / 1e6:.2f} M points/s)")
    if len(backends) == 2:
        v1, g1 = backends["python"](*call)
        v2, g2 = backends["cython"](*call)
        diff = max(np.max(np.abs(v1 - v2)), np.max(np.abs(g1 - g2)))
        print(f"  speedup {times['python'] / times['cython']:.1f}x, max abs difference {diff:.1e}")


if __name__ == "__main__":
    main()
