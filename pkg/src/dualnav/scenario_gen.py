"""Procedural corridor mazes with a controlled number of junctions.

The maze lives on a lattice: nodes are ``w x w`` blocks of free cells
separated by one-cell walls (``w`` is the corridor width). A main route is
grown as a self-avoiding walk from start to goal, then side branches are
attached at distinct interior route nodes. Every branch is a dead end, so
the free space is a tree, the route is the unique shortest path, and each
branch adds exactly one junction. Optional rooms open up at branch tips.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels
from .world import DEFAULT_MAX_STEPS, DEFAULT_RESOLUTION, EpisodeSpec, GroundTruthGrid, Pose, save_scenario

Node = tuple[int, int]
_DIRS = ((0, 1), (1, 0), (0, -1), (-1, 0))
_ORDINALS = ("first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth")


class GenerationExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    size: int = 41
    room_count: int = 0
    corridor_width: int = 1
    junction_target: int = 4
    min_geodesic: float = 10.0
    # straight-line start-goal separation, so the goal disc does not cover the start
    min_euclidean: float = 6.0
    resolution: float = DEFAULT_RESOLUTION
    branch_nodes: tuple[int, int] = (2, 4)
    route_slack: int = 3
    max_steps: int = DEFAULT_MAX_STEPS
    success_radius: float = 3.0
    max_tries: int = 2000

    def __post_init__(self) -> None:
        if self.corridor_width < 1:
            raise ValueError("corridor_width must be >= 1")
        if (self.size - 1) % (self.corridor_width + 1) != 0 or self.size < 5:
            raise ValueError(f"size must be 1 + n*(corridor_width+1) with n >= 2, got {self.size}")
        if self.junction_target < 0 or self.room_count < 0:
            raise ValueError("counts must be non-negative")
        if self.room_count > self.junction_target:
            raise ValueError("rooms sit at branch tips, so room_count <= junction_target")
        lo, hi = self.branch_nodes
        if not 1 <= lo <= hi:
            raise ValueError("branch_nodes must satisfy 1 <= lo <= hi")

    @property
    def pitch(self) -> int:
        return self.corridor_width + 1

    @property
    def lattice(self) -> int:
        return (self.size - 1) // self.pitch


@dataclass(frozen=True)
class GeneratedScenario:
    spec: EpisodeSpec
    reference_path: tuple[tuple[float, float], ...]
    geodesic_m: float
    junctions: int
    route: tuple[Node, ...]


class _Carver:
    def __init__(self, g: GenSpec):
        self.g = g
        self.occ = np.ones((g.size, g.size), dtype=bool)
        self.room = np.zeros_like(self.occ)
        self.used: set[Node] = set()

    def block(self, n: Node) -> tuple[slice, slice]:
        p, w = self.g.pitch, self.g.corridor_width
        r0, c0 = 1 + n[0] * p, 1 + n[1] * p
        return slice(r0, r0 + w), slice(c0, c0 + w)

    def centre(self, n: Node) -> tuple[int, int]:
        p, w = self.g.pitch, self.g.corridor_width
        return (1 + n[0] * p + (w - 1) // 2, 1 + n[1] * p + (w - 1) // 2)

    def open_node(self, n: Node) -> None:
        self.occ[self.block(n)] = False
        self.used.add(n)

    def connect(self, a: Node, b: Node) -> None:
        p, w = self.g.pitch, self.g.corridor_width
        if a[0] == b[0]:
            col = 1 + min(a[1], b[1]) * p + w
            r0 = 1 + a[0] * p
            self.occ[r0:r0 + w, col] = False
        else:
            row = 1 + min(a[0], b[0]) * p + w
            c0 = 1 + a[1] * p
            self.occ[row, c0:c0 + w] = False

    def inside(self, n: Node) -> bool:
        m = self.g.lattice
        return 0 <= n[0] < m and 0 <= n[1] < m

    def free_neighbours(self, n: Node) -> list[Node]:
        return [(n[0] + dr, n[1] + dc) for dr, dc in _DIRS
                if self.inside((n[0] + dr, n[1] + dc)) and (n[0] + dr, n[1] + dc) not in self.used]


def _walk(carver: _Carver, start: Node, length: int, rng: np.random.Generator, budget: int = 20000) -> list[Node] | None:
    """Random self-avoiding walk of ``length`` nodes over unused nodes (DFS with backtracking)."""
    path = [start]
    on_path = {start}
    stack = [list(rng.permutation(4))]
    expansions = 0
    while path:
        if len(path) == length:
            return path
        opts = stack[-1]
        moved = False
        while opts:
            dr, dc = _DIRS[opts.pop()]
            nxt = (path[-1][0] + dr, path[-1][1] + dc)
            if carver.inside(nxt) and nxt not in carver.used and nxt not in on_path:
                path.append(nxt)
                on_path.add(nxt)
                stack.append(list(rng.permutation(4)))
                moved = True
                break
        expansions += 1
        if expansions > budget:
            return None
        if not moved:
            on_path.discard(path.pop())
            stack.pop()
    return None


def _carve_path(carver: _Carver, nodes: list[Node]) -> None:
    for i, n in enumerate(nodes):
        carver.open_node(n)
        if i:
            carver.connect(nodes[i - 1], n)


def _carve_room(carver: _Carver, tip: Node, rng: np.random.Generator) -> bool:
    """Open a 2x2-node room next to a branch tip, joined by one connector."""
    for k in rng.permutation(4):
        dr, dc = _DIRS[k]
        door = (tip[0] + dr, tip[1] + dc)
        # room spans door and the 2x2 block extending away from the tip
        ar = door[0] if dr >= 0 else door[0] - 1
        ac = door[1] if dc >= 0 else door[1] - 1
        if dr == 0:
            ar = door[0] - int(rng.integers(0, 2))
        if dc == 0:
            ac = door[1] - int(rng.integers(0, 2))
        nodes = [(ar + i, ac + j) for i in range(2) for j in range(2)]
        if door not in nodes or not all(carver.inside(n) and n not in carver.used for n in nodes):
            continue
        rs, cs = carver.block(nodes[0])
        re_, ce = carver.block(nodes[-1])
        carver.occ[rs.start:re_.stop, cs.start:ce.stop] = False
        carver.room[rs.start:re_.stop, cs.start:ce.stop] = True
        carver.used.update(nodes)
        carver.connect(tip, door)
        return True
    return False


def count_junctions(free: np.ndarray, exclude: np.ndarray | None = None) -> int:
    """Free cells with at least three free 4-neighbours (optionally masked)."""
    f = np.pad(free, 1, constant_values=False)
    n = f[:-2, 1:-1].astype(int) + f[2:, 1:-1] + f[1:-1, :-2] + f[1:-1, 2:]
    j = free & (n >= 3)
    if exclude is not None:
        j &= ~exclude
    return int(j.sum())


def _heading_of(d: tuple[int, int]) -> int:
    # +x is +col, +y is +row
    return int(round(math.degrees(math.atan2(d[0], d[1])))) % 360


def _instruction(route: list[Node], junction_nodes: set[Node], rooms: bool) -> str:
    parts = ["Walk along the corridor from the start."]
    k = 0
    for i in range(1, len(route) - 1):
        n = route[i]
        a = _heading_of((n[0] - route[i - 1][0], n[1] - route[i - 1][1]))
        b = _heading_of((route[i + 1][0] - n[0], route[i + 1][1] - n[1]))
        turn = (b - a) % 360
        move = {0: "go straight", 90: "turn left", 270: "turn right"}[turn]
        if n in junction_nodes:
            ordinal = _ORDINALS[k] if k < len(_ORDINALS) else f"{k + 1}th"
            parts.append(f"At the {ordinal} junction, {move}.")
            k += 1
    if rooms:
        parts.append("Ignore the side rooms.")
    parts.append("Stop at the dead end where the corridor finishes.")
    return " ".join(parts)


def _try(g: GenSpec, rng: np.random.Generator) -> GeneratedScenario | None:
    carver = _Carver(g)
    m = g.lattice
    hop_m = g.pitch * g.resolution
    need = int(math.ceil(g.min_geodesic / hop_m - 1e-9)) + 1
    length = need + int(rng.integers(0, g.route_slack + 1))
    if length > m * m:
        return None
    start = (int(rng.integers(0, m)), int(rng.integers(0, m)))
    route = _walk(carver, start, length, rng)
    if route is None:
        return None
    _carve_path(carver, route)

    junction_nodes: set[Node] = set()
    tips: list[Node] = []
    interior = list(range(1, len(route) - 1))
    rng.shuffle(interior)
    lo, hi = g.branch_nodes
    for idx in interior:
        if len(junction_nodes) == g.junction_target:
            break
        node = route[idx]
        exits = carver.free_neighbours(node)
        if not exits:
            continue
        first = exits[int(rng.integers(0, len(exits)))]
        blen = int(rng.integers(lo, hi + 1))
        branch = _walk(carver, first, blen, rng, budget=2000)
        if branch is None:
            branch = [first]
        _carve_path(carver, branch)
        carver.connect(node, first)
        junction_nodes.add(node)
        tips.append(branch[-1])
    if len(junction_nodes) != g.junction_target:
        return None
    rooms = 0
    for tip in tips:
        if rooms == g.room_count:
            break
        if _carve_room(carver, tip, rng):
            rooms += 1
    if rooms != g.room_count:
        return None

    grid = GroundTruthGrid(carver.occ, g.resolution)
    sr, sc = carver.centre(route[0])
    tr, tc = carver.centre(route[-1])
    res = kernels.astar_grid(grid.passable, sr, sc, tr, tc)
    if res is None:
        return None
    cells, ns, nd = res
    geo = (ns + nd * kernels.SQRT2) * g.resolution
    if geo < g.min_geodesic - 1e-9:
        return None
    # connectivity: everything free is reachable from the start
    ds, _ = kernels.distance_field(grid.passable, sr, sc)
    if np.any((ds < 0) & ~grid.occupied):
        return None
    junctions = count_junctions(~carver.occ, carver.room) if g.corridor_width == 1 else len(junction_nodes)
    if abs(junctions - g.junction_target) > 2:
        return None

    if math.hypot(tr - sr, tc - sc) * g.resolution < g.min_euclidean - 1e-9:
        return None
    ref = tuple(grid.center(int(r), int(c)) for r, c in cells)
    heading = 90 * int(rng.integers(0, 4))
    spec = EpisodeSpec(
        grid=grid,
        start=Pose(*grid.center(sr, sc), heading),
        goal=grid.center(tr, tc),
        instruction=_instruction(route, junction_nodes, rooms > 0),
        max_steps=g.max_steps,
        success_radius=g.success_radius,
        reference_path=ref,
        name=f"maze_s{g.seed}",
    ).validate()
    return GeneratedScenario(spec, ref, geo, junctions, tuple(route))


def generate(g: GenSpec) -> GeneratedScenario:
    """Deterministic in ``g``; raises GenerationExhausted after ``max_tries`` rejections."""
    rng = np.random.default_rng(g.seed)
    for _ in range(g.max_tries):
        out = _try(g, rng)
        if out is not None:
            return out
    raise GenerationExhausted(f"no scenario satisfying {g} after {g.max_tries} attempts")


def generate_suite(n: int, base: GenSpec, out_dir: str | Path | None = None) -> list[GeneratedScenario]:
    """Scenarios for seeds ``base.seed .. base.seed + n - 1``; optionally written as ``maze_XXX.json``."""
    out = []
    for i in range(n):
        gs = generate(replace(base, seed=base.seed + i))
        out.append(gs)
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            save_scenario(gs.spec, Path(out_dir) / f"maze_{i:03d}.json")
    return out
