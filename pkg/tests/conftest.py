import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dualnav.world import EpisodeSpec, GroundTruthGrid, Pose  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


def walled(h: int, w: int, inner: list[str] | None = None) -> GroundTruthGrid:
    """h x w room with a one-cell wall; ``inner`` rows overwrite the interior."""
    rows = ["#" * w] + ["#" + "." * (w - 2) + "#" for _ in range(h - 2)] + ["#" * w]
    if inner:
        for i, line in enumerate(inner):
            rows[i + 1] = "#" + line + "#"
    return GroundTruthGrid.from_rows(rows)


def make_spec(grid: GroundTruthGrid, start_cell, goal_cell, heading=0, **kw) -> EpisodeSpec:
    sx, sy = grid.center(*start_cell)
    gx, gy = grid.center(*goal_cell)
    return EpisodeSpec(grid=grid, start=Pose(sx, sy, heading), goal=(gx, gy), **kw).validate()


def random_grid(rng: np.random.Generator, h: int, w: int, p_wall: float) -> np.ndarray:
    """Boolean occupancy with a solid border."""
    occ = rng.random((h, w)) < p_wall
    occ[0, :] = occ[-1, :] = True
    occ[:, 0] = occ[:, -1] = True
    return occ


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


# acceptance verdicts, printed after the run whatever the capture mode
VERDICTS: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    def order(key):
        num, _, rest = key.partition(".")
        return int(num), rest

    for key in sorted(VERDICTS, key=order):
        ok, detail = VERDICTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
