"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the median time per call for each
backend and the speed-up, after checking both give identical output.
"""
from __future__ import annotations

import argparse
import statistics
import sys
import time

import numpy as np

from dualnav import kernels
from dualnav.scenario_gen import GenSpec, generate


def _median_time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def cases():
    sc = generate(GenSpec(seed=7)).spec
    g = sc.grid
    occ = g.occ_u8
    passable = g.passable
    sr, sc_ = g.cell_of(*sc.start.position)
    tr, tc = g.cell_of(*sc.goal)
    rng = np.random.default_rng(0)
    a = rng.random((200, 2)) * 10
    b = rng.random((150, 2)) * 10
    x, y = sc.start.position
    return {
        "visible_cells": lambda be: be.visible_cells(occ, x, y, 0.0, 90.0, 5.0, g.resolution),
        "astar_grid": lambda be: be.astar_grid(passable, sr, sc_, tr, tc),
        "distance_field": lambda be: be.distance_field(passable, sr, sc_),
        "dtw": lambda be: be.dtw(a, b),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled extension not available; only the Python backend can be timed", file=sys.stderr)
    print(f"{'kernel':<16}{'python (ms)':>14}{'cython (ms)':>14}{'speed-up':>10}")
    for name, call in cases().items():
        py = _median_time(lambda: call(kernels.python_backend), args.repeat)
        if kernels.compiled_backend is None:
            print(f"{name:<16}{py * 1e3:>14.3f}{'-':>14}{'-':>10}")
            continue
        if not _same(call(kernels.python_backend), call(kernels.compiled_backend)):
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        cy = _median_time(lambda: call(kernels.compiled_backend), args.repeat)
        print(f"{name:<16}{py * 1e3:>14.3f}{cy * 1e3:>14.3f}{py / cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
