#!/usr/bin/env python3
"""Time the compiled kernels against the numpy fallback on the fixtures.

    python benchmarks/bench_kernels.py [--repeat N] [--end-to-end]

Each kernel is run on identical inputs through both backends; outputs are
compared before timing so a speedup never hides a disagreement.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from pursuit import kernels
from pursuit.geometry import EPS, load_environment
from pursuit.grid import GridModel

ENVS = Path(__file__).resolve().parents[1] / "environments"


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(env, resolution):
    x0, y0, x1, y1 = env.bbox
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(x0, x1, 4000), rng.uniform(y0, y1, 4000)])
    grid = GridModel(env, resolution)
    centers = grid.centers
    viewer = tuple(centers[len(centers) // 2])
    segs = np.hstack([pts[:2000], pts[2000:]])
    b = env.boundary
    return {
        "points_in_free": lambda be: kernels.points_in_free(b, pts, EPS, False, backend=be),
        "visible_from": lambda be: kernels.visible_from(b, viewer, centers, EPS, backend=be),
        "segments_cross": lambda be: kernels.segments_cross(b, segs, EPS, backend=be),
    }


def end_to_end(repeat):
    """Full team runs through the CLI, once per backend."""
    runs = [("square_hole", 0), ("dumbbell", 11)]
    print(f"\n{'solve':<14}{'python s':>11}{'cython s':>11}{'speedup':>9}")
    for name, start in runs:
        cmd = [sys.executable, "-m", "pursuit.cli", "solve", str(ENVS / f"{name}.json"), "--start", str(start)]
        times = {}
        for pure in ("1", "0"):
            env = dict(os.environ, PURSUIT_PURE=pure)
            times[pure] = _best(lambda: subprocess.run(cmd, env=env, check=True, capture_output=True), repeat)
        print(f"{name:<14}{times['1']:>11.2f}{times['0']:>11.2f}{times['1'] / times['0']:>8.1f}x")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid", type=int, default=100)
    ap.add_argument("--end-to-end", action="store_true", help="also time full team runs")
    args = ap.parse_args(argv)
    if kernels.BACKEND != "cython":
        print("compiled kernels not built; only the fallback is available")
        return 1
    print(f"{'environment':<14}{'kernel':<16}{'python ms':>11}{'cython ms':>11}{'speedup':>9}")
    for path in sorted(ENVS.glob("*.json")):
        env = load_environment(path)
        for name, fn in cases(env, args.grid).items():
            a, c = fn("python"), fn("cython")
            if not np.array_equal(a, c):
                raise SystemExit(f"{path.stem}/{name}: backends disagree")
            tp = _best(lambda: fn("python"), args.repeat)
            tc = _best(lambda: fn("cython"), args.repeat)
            print(f"{path.stem:<14}{name:<16}{tp * 1e3:>11.2f}{tc * 1e3:>11.2f}{tp / tc:>8.1f}x")
    if args.end_to_end:
        end_to_end(max(1, args.repeat // 2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
