"""Kernel dispatch: compiled extension when importable, pure Python otherwise.

Set ``DUALNAV_PURE_PYTHON=1`` to force the fallback (used by the parity
tests and the benchmark).
"""
from __future__ import annotations

import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("DUALNAV_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

SQRT2 = python_backend.SQRT2
NEIGHBOURS = python_backend.NEIGHBOURS

visible_cells = _impl.visible_cells
astar_grid = _impl.astar_grid
distance_field = _impl.distance_field
dtw = _impl.dtw
