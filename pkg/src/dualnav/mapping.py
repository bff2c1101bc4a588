"""Incremental belief map and frontier extraction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .world import FREE, OCCUPIED, GroundTruthGrid, Observation, cell_of

UNKNOWN = 0

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class OccupancyMap:
    """Per-cell belief: UNKNOWN (0), FREE (1) or OCCUPIED (2).

    The backing array is read-only; updates return a new map.
    """

    cells: np.ndarray
    resolution: float

    def __post_init__(self) -> None:
        arr = np.array(self.cells, dtype=np.int8)
        if arr.ndim != 2:
            raise ValueError("cells must be 2-D")
        if arr.size and (arr.min() < UNKNOWN or arr.max() > OCCUPIED):
            raise ValueError("cell states must be 0 (unknown), 1 (free) or 2 (occupied)")
        arr.setflags(write=False)
        object.__setattr__(self, "cells", arr)

    @classmethod
    def empty(cls, height: int, width: int, resolution: float) -> "OccupancyMap":
        return cls(np.zeros((height, width), dtype=np.int8), resolution)

    @classmethod
    def like(cls, grid: GroundTruthGrid) -> "OccupancyMap":
        return cls.empty(grid.height, grid.width, grid.resolution)

    @classmethod
    def from_truth(cls, grid: GroundTruthGrid) -> "OccupancyMap":
        return cls(np.where(grid.occupied, OCCUPIED, FREE).astype(np.int8), grid.resolution)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return cell_of(x, y, self.resolution)

    def center(self, row: int, col: int) -> tuple[float, float]:
        return (col * self.resolution, row * self.resolution)

    def state(self, row: int, col: int) -> int:
        if 0 <= row < self.height and 0 <= col < self.width:
            return int(self.cells[row, col])
        return OCCUPIED

    def unknown_count(self) -> int:
        return int(np.count_nonzero(self.cells == UNKNOWN))

    def passable(self) -> np.ndarray:
        return (self.cells == FREE).astype(np.uint8)

    def with_cells(self, rows, cols, states) -> "OccupancyMap":
        arr = self.cells.copy()
        arr[rows, cols] = states
        return OccupancyMap(arr, self.resolution)

    def to_rows(self) -> list[str]:
        sym = {UNKNOWN: "?", FREE: ".", OCCUPIED: "#"}
        return ["".join(sym[int(v)] for v in row) for row in self.cells]

    @classmethod
    def from_rows(cls, rows, resolution: float) -> "OccupancyMap":
        code = {"?": UNKNOWN, ".": FREE, "#": OCCUPIED}
        return cls(np.array([[code[ch] for ch in r] for r in rows], dtype=np.int8), resolution)


def update_occupancy(belief: OccupancyMap, obs: Observation) -> OccupancyMap:
    """Record every visible cell; cells never revert to UNKNOWN."""
    if not obs.visible_cells:
        return belief
    vis = np.asarray(obs.visible_cells, dtype=np.int64)
    rows, cols, states = vis[:, 0], vis[:, 1], vis[:, 2]
    if rows.min() < 0 or cols.min() < 0 or rows.max() >= belief.height or cols.max() >= belief.width:
        raise IndexError("observation contains cells outside the map")
    return belief.with_cells(rows, cols, states.astype(np.int8))


def mark_free(belief: OccupancyMap, row: int, col: int) -> OccupancyMap:
    """Record the agent's own cell (proprioception; the sensor excludes it)."""
    if belief.cells[row, col] == FREE:
        return belief
    return belief.with_cells(row, col, FREE)


@dataclass(frozen=True)
class Frontier:
    cells: tuple[tuple[int, int], ...]
    representative: tuple[float, float]
    rep_cell: tuple[int, int]

    def __len__(self) -> int:
        return len(self.cells)


def frontier_mask(cells: np.ndarray) -> np.ndarray:
    """Free cells with at least one 4-neighbour UNKNOWN (out of bounds is not unknown)."""
    unk = cells == UNKNOWN
    near = np.zeros_like(unk)
    near[1:, :] |= unk[:-1, :]
    near[:-1, :] |= unk[1:, :]
    near[:, 1:] |= unk[:, :-1]
    near[:, :-1] |= unk[:, 1:]
    return (cells == FREE) & near


def representative_cell(members: np.ndarray) -> tuple[int, int]:
    """Member nearest the centroid; ties go to the row-major smallest."""
    cr, cc = members.mean(axis=0)
    d2 = (members[:, 0] - cr) ** 2 + (members[:, 1] - cc) ** 2
    order = np.lexsort((members[:, 1], members[:, 0], d2))
    r, c = members[order[0]]
    return int(r), int(c)


def detect_frontiers(belief: OccupancyMap, min_cluster: int = 2) -> list[Frontier]:
    mask = frontier_mask(belief.cells)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    out = []
    for lab in range(1, n + 1):
        members = np.argwhere(labels == lab)  # row-major order
        if len(members) < min_cluster:
            continue
        rr, rc = representative_cell(members)
        out.append(Frontier(
            cells=tuple((int(r), int(c)) for r, c in members),
            representative=belief.center(rr, rc),
            rep_cell=(rr, rc),
        ))
    out.sort(key=lambda f: f.rep_cell)
    return out
