import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from conftest import random_grid, walled
from oracles import dijkstra_exact, path_cost_exact

from dualnav.mapping import OccupancyMap
from dualnav.planner import (
    InterpolationConfig,
    InvalidStart,
    NoPath,
    PlannedPath,
    astar,
    geodesic_field,
    greedy_action,
    interpolate,
    parse_path_lines,
    path_lines,
    subdivisions,
)
from dualnav.world import Action, Pose


def _belief(occ: np.ndarray, res: float = 0.25) -> OccupancyMap:
    return OccupancyMap(np.where(occ, 2, 1).astype(np.int8), res)


def test_start_equals_target():
    b = OccupancyMap.from_truth(walled(5, 5))
    p = astar(b, (0.5, 0.5), (0.5, 0.5))
    assert p.nodes == ((0.5, 0.5),) and p.cost == 0.0


def test_open_3x3_corner_to_corner():
    b = _belief(np.zeros((3, 3), bool), res=1.0)
    p = astar(b, (0.0, 0.0), (2.0, 2.0))
    assert p.cost == 2 * math.sqrt(2.0)
    assert dijkstra_exact(np.ones((3, 3), bool), (0, 0))[(2, 2)].value() == p.cost


def test_target_behind_wall_is_unreachable():
    b = OccupancyMap.from_truth(walled(7, 7, ["..#..", "..#..", "..#..", "..#..", "..#.."]))
    with pytest.raises(NoPath):
        astar(b, (0.25, 0.25), (1.25, 1.25))


def test_unknown_cells_block_and_bad_start_raises():
    cells = np.ones((3, 5), np.int8)
    cells[:, 2] = 0
    b = OccupancyMap(cells, 1.0)
    with pytest.raises(NoPath):
        astar(b, (0.0, 1.0), (4.0, 1.0))
    with pytest.raises(InvalidStart):
        astar(b, (2.0, 1.0), (4.0, 1.0))


def test_no_corner_cutting():
    occ = np.array([[0, 1], [1, 0]], bool)
    with pytest.raises(NoPath):
        astar(_belief(occ, 1.0), (0.0, 0.0), (1.0, 1.0))


def test_astar_matches_exact_dijkstra_on_random_maps():
    rng = np.random.default_rng(3)
    for _ in range(40):
        occ = random_grid(rng, 20, 20, 0.3)
        free = ~occ
        cells = np.argwhere(free)
        s = tuple(cells[rng.integers(len(cells))])
        dist = dijkstra_exact(free, s)
        b = _belief(occ, 1.0)
        for t in map(tuple, cells[rng.choice(len(cells), size=min(15, len(cells)), replace=False)]):
            if t not in dist:
                with pytest.raises(NoPath):
                    astar(b, (float(s[1]), float(s[0])), (float(t[1]), float(t[0])))
                continue
            p = astar(b, (float(s[1]), float(s[0])), (float(t[1]), float(t[0])))
            assert path_cost_exact(p.cells) == dist[t]
            assert p.cost == dist[t].value()
            assert p.cells[0] == s and p.cells[-1] == t


def test_astar_is_deterministic():
    occ = random_grid(np.random.default_rng(9), 16, 16, 0.2)
    b = _belief(occ)
    free = np.argwhere(~occ)
    s, t = b.center(*free[0]), b.center(*free[-1])
    try:
        a = astar(b, s, t)
    except NoPath:
        pytest.skip("disconnected sample")
    assert astar(b, s, t) == a


def test_geodesic_field_matches_dijkstra():
    occ = random_grid(np.random.default_rng(4), 15, 15, 0.25)
    src = tuple(np.argwhere(~occ)[0])
    field = geodesic_field((~occ).astype(np.uint8), src, 0.5)
    dist = dijkstra_exact(~occ, src)
    for (r, c), v in np.ndenumerate(field):
        if (r, c) in dist:
            assert v == dist[(r, c)].value() * 0.5
        else:
            assert v == math.inf


def test_interpolation_keeps_short_paths():
    p = PlannedPath(((0.0, 0.0), (0.25, 0.0), (0.5, 0.25)), cost=1.0)
    assert interpolate(p, InterpolationConfig(0.5)) is p
    assert interpolate(p, InterpolationConfig(10.0)) is p


def test_unit_segment_at_0_3():
    p = PlannedPath(((0.0, 0.0), (1.0, 0.0)), cost=1.0)
    out = interpolate(p, InterpolationConfig(0.3))
    assert len(out.nodes) == 5  # ceil(1.0 / 0.3) = 4 pieces, 3 inserted points
    assert [x for x, _ in out.nodes] == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_subdivisions_exact_multiple_is_strict():
    # length equal to a multiple of d still needs one more piece for spacing < d
    assert subdivisions(1.0, 0.5) == 3
    assert subdivisions(0.49, 0.5) == 1
    assert subdivisions(0.3, 0.3) == 2


def test_interpolation_rejects_bad_spacing():
    with pytest.raises(ValueError):
        InterpolationConfig(0.0)


def _is_subsequence(small, big) -> bool:
    it = iter(big)
    return all(any(x == y for y in it) for x in small)


points = st.tuples(st.floats(-20, 20, allow_nan=False), st.floats(-20, 20, allow_nan=False))


@settings(max_examples=300, deadline=None)
@given(st.lists(points, min_size=1, max_size=12), st.sampled_from([0.3, 0.5, 1.0]))
def test_interpolation_contract(nodes, d):
    p = PlannedPath(tuple(nodes), cost=0.0)
    out = interpolate(p, InterpolationConfig(d))
    assert all(math.dist(a, b) < d for a, b in zip(out.nodes, out.nodes[1:]))
    assert _is_subsequence(p.nodes, out.nodes)
    assert abs(out.length() - p.length()) <= 1e-9


def test_interpolation_guards_against_lerp_rounding():
    # 10 pieces should suffice, but one lerped gap rounds up to 0.5
    p = PlannedPath(((0.0, 0.0), (0.0, 4.9999999999999964)), cost=0.0)
    out = interpolate(p, InterpolationConfig(0.5))
    assert all(math.dist(a, b) < 0.5 for a, b in zip(out.nodes, out.nodes[1:]))


def test_path_lines_round_trip():
    nodes = [(0.1, 0.2), (1 / 3, -2.5)]
    assert parse_path_lines(path_lines(nodes)) == nodes
    with pytest.raises(ValueError, match="line 1"):
        parse_path_lines("1.0\n")


def test_greedy_action_turns_then_moves():
    assert greedy_action(Pose(0.0, 0.0, 0), (1.0, 0.0)) is Action.MoveForward
    assert greedy_action(Pose(0.0, 0.0, 0), (0.0, 1.0)) is Action.TurnLeft
    assert greedy_action(Pose(0.0, 0.0, 0), (0.0, -1.0)) is Action.TurnRight
    # 7.5 degrees off is close enough
    tx = math.cos(math.radians(7.5))
    ty = math.sin(math.radians(7.5))
    assert greedy_action(Pose(0.0, 0.0, 0), (tx, ty)) is Action.MoveForward
