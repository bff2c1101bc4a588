"""Compiled kernels must agree bit for bit with the Python fallback."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from conftest import random_grid

from dualnav import kernels

py = kernels.python_backend
cy = kernels.compiled_backend
needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def _same(a, b):
    if a is None or b is None:
        return a is b
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.dtype == b.dtype and np.array_equal(a, b)
    return a == b


@needs_ext
@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 23), st.sampled_from([60.0, 90.0, 360.0]))
def test_visible_cells_parity(seed, heading_step, fov):
    rng = np.random.default_rng(seed)
    occ = random_grid(rng, 30, 30, 0.2).astype(np.uint8)
    x, y = rng.uniform(0.3, 7.0, size=2)
    h = float(heading_step * 15)
    assert _same(py.visible_cells(occ, x, y, h, fov, 5.0, 0.25), cy.visible_cells(occ, x, y, h, fov, 5.0, 0.25))


@needs_ext
@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_astar_and_distance_field_parity(seed):
    rng = np.random.default_rng(seed)
    passable = (~random_grid(rng, 25, 25, 0.3)).astype(np.uint8)
    free = np.argwhere(passable)
    if len(free) < 2:
        return
    (sr, sc), (tr, tc) = free[rng.choice(len(free), 2, replace=False)]
    assert _same(py.astar_grid(passable, sr, sc, tr, tc), cy.astar_grid(passable, sr, sc, tr, tc))
    assert _same(py.distance_field(passable, sr, sc), cy.distance_field(passable, sr, sc))


@needs_ext
@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dtw_parity(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(int(rng.integers(1, 30)), 2))
    b = rng.normal(size=(int(rng.integers(1, 30)), 2))
    assert py.dtw(a, b) == cy.dtw(a, b)


def test_environment_switch_forces_python():
    code = "from dualnav import kernels; print(kernels.BACKEND)"
    env = {**os.environ, "DUALNAV_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_dispatch_points_at_one_backend():
    impl = cy if cy is not None else py
    assert kernels.astar_grid is impl.astar_grid
    assert kernels.BACKEND == ("cython" if cy is not None else "python")
