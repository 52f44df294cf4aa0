"""Compare the compiled geometry kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--points N] [--level L]``.
Both backends are timed on the same random points against a Koch
snowflake polygon, and their results are checked for agreement.
"""

import argparse
import timeit

import numpy as np

from boundecay import _fallback
from boundecay.geometry import koch_snowflake

try:
    from boundecay import _accel
except ImportError:  # extension not built
    _accel = None


def _segments(verts):
    return verts, np.roll(verts, -1, axis=0)


def run(n_points, level, repeat):
    rng = np.random.default_rng(0)
    verts = np.ascontiguousarray(koch_snowflake(level), dtype=float)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    pts = np.ascontiguousarray(lo + (hi - lo) * rng.random((n_points, 2)))
    seg_a, seg_b = (np.ascontiguousarray(s) for s in _segments(verts))
    print(f"{n_points} points, {len(verts)} polygon segments, best of {repeat}")
    backends = {"python": _fallback}
    if _accel is not None:
        backends["cython"] = _accel
    results = {}
    for name, mod in backends.items():
        t_dist = min(timeit.repeat(lambda: mod.segment_distance(pts, seg_a, seg_b), number=1, repeat=repeat))
        t_pip = min(timeit.repeat(lambda: mod.points_in_polygon(pts, verts), number=1, repeat=repeat))
        results[name] = (mod.segment_distance(pts, seg_a, seg_b), mod.points_in_polygon(pts, verts))
        print(f"  {name:<7} segment_distance {t_dist * 1e3:9.2f} ms   points_in_polygon {t_pip * 1e3:9.2f} ms")
    if "cython" in results:
        d_py, in_py = results["python"]
        d_cy, in_cy = results["cython"]
        print(f"  max |distance difference| = {np.max(np.abs(d_py - d_cy)):.3e}")
        print(f"  inside flags agree: {bool(np.array_equal(np.asarray(in_py, bool), np.asarray(in_cy, bool)))}")
    else:
        print("  compiled extension not built; only the fallback was timed")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=20000)
    parser.add_argument("--level", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    run(args.points, args.level, args.repeat)


if __name__ == "__main__":
    main()
