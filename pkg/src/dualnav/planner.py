"""Grid A* to frontier targets and spacing-bounded path interpolation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels
from .mapping import Frontier, OccupancyMap
from .world import Action

DEFAULT_SPACING = 0.5


class PlanningError(Exception):
    pass


class NoPath(PlanningError):
    pass


class InvalidStart(PlanningError):
    pass


@dataclass(frozen=True)
class PlannedPath:
    nodes: tuple[tuple[float, float], ...]
    cost: float  # metres along the cell graph
    cells: tuple[tuple[int, int], ...] = ()

    def __len__(self) -> int:
        return len(self.nodes)

    def length(self) -> float:
        return polyline_length(self.nodes)


def polyline_length(nodes) -> float:
    return sum(math.dist(a, b) for a, b in zip(nodes, nodes[1:]))


def cost_cells(n_straight: int, n_diag: int) -> float:
    return n_straight + n_diag * kernels.SQRT2


def astar(belief: OccupancyMap, start: tuple[float, float], target: tuple[float, float]) -> PlannedPath:
    """Shortest 8-connected path over FREE cells (unknown counts as blocked).

    The first node is ``start`` as given; later nodes are cell centres.
    """
    sr, sc = belief.cell_of(*start)
    tr, tc = belief.cell_of(*target)
    if belief.state(sr, sc) != 1:
        raise InvalidStart(f"start cell {(sr, sc)} is not free")
    if belief.state(tr, tc) != 1:
        raise NoPath(f"target cell {(tr, tc)} is not free")
    if (sr, sc) == (tr, tc):
        return PlannedPath(nodes=(tuple(start),), cost=0.0, cells=((sr, sc),))
    res = kernels.astar_grid(belief.passable(), sr, sc, tr, tc)
    if res is None:
        raise NoPath(f"no path from {(sr, sc)} to {(tr, tc)}")
    cells, ns, nd = res
    cells_t = tuple((int(r), int(c)) for r, c in cells)
    nodes = [tuple(start)] + [belief.center(r, c) for r, c in cells_t[1:]]
    return PlannedPath(nodes=tuple(nodes), cost=cost_cells(ns, nd) * belief.resolution, cells=cells_t)


@dataclass(frozen=True)
class InterpolationConfig:
    d: float = DEFAULT_SPACING

    def __post_init__(self) -> None:
        if not self.d > 0:
            raise ValueError("spacing d must be positive")


def subdivisions(length: float, d: float) -> int:
    """Smallest n with length / n strictly below d."""
    if length < d:
        return 1
    n = int(math.floor(length / d)) + 1
    while length / n >= d:
        n += 1
    return n


def interpolate(path: PlannedPath, cfg: InterpolationConfig = InterpolationConfig()) -> PlannedPath:
    d = cfg.d
    nodes = path.nodes
    out = [nodes[0]]
    for a, b in zip(nodes, nodes[1:]):
        n = subdivisions(math.dist(a, b), d)
        while True:
            seg = [a]
            for k in range(1, n):
                t = k / n
                seg.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
            seg.append(b)
            # rounding in the lerp can push a gap up to d; add a piece until none is
            if all(math.dist(p, q) < d for p, q in zip(seg, seg[1:])):
                break
            n += 1
        out.extend(seg[1:])
    if len(out) == len(nodes):
        return path
    return PlannedPath(nodes=tuple(out), cost=path.cost, cells=path.cells)


def project_frontier(frontier: Frontier) -> tuple[float, float]:
    """2-D frontier point to planning target; identity on a planar map."""
    return frontier.representative


def path_lines(nodes: Iterable[tuple[float, float]]) -> str:
    """Line records ``x y`` in metres, one node per line."""
    return "".join(f"{x!r} {y!r}\n" for x, y in nodes)


def parse_path_lines(text: str) -> list[tuple[float, float]]:
    out = []
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {i}: expected 'x y'")
        out.append((float(parts[0]), float(parts[1])))
    return out


def nodes_array(path: PlannedPath) -> np.ndarray:
    return np.asarray(path.nodes, dtype=float).reshape(-1, 2)


def geodesic_field(passable: np.ndarray, cell: tuple[int, int], resolution: float) -> np.ndarray:
    """Shortest-path distance in metres from ``cell`` to every cell (inf if unreachable)."""
    ds, dd = kernels.distance_field(np.ascontiguousarray(passable, dtype=np.uint8), int(cell[0]), int(cell[1]))
    out = (ds + dd * kernels.SQRT2) * resolution
    out[ds < 0] = np.inf
    return out


def greedy_action(pose, target: tuple[float, float], tol_deg: float = 7.5):
    """One step of heading alignment: turn toward ``target`` or move forward."""
    desired = math.degrees(math.atan2(target[1] - pose.y, target[0] - pose.x))
    delta = (desired - pose.heading + 540.0) % 360.0 - 180.0
    if abs(delta) <= tol_deg:
        return Action.MoveForward
    return Action.TurnLeft if delta > 0 else Action.TurnRight
