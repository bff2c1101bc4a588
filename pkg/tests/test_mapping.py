import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from conftest import random_grid, walled
from oracles import frontiers_bruteforce

from dualnav.mapping import (
    FREE,
    UNKNOWN,
    OccupancyMap,
    detect_frontiers,
    frontier_mask,
    mark_free,
    update_occupancy,
)
from dualnav.planner import project_frontier
from dualnav.world import Observation, Pose, SensorConfig, observe


def test_observation_marks_only_seen_cells():
    belief = OccupancyMap.empty(6, 6, 0.25)
    obs = Observation(Pose(0.5, 0.5), tuple((2, c, FREE) for c in range(5)))
    b = update_occupancy(belief, obs)
    assert int((b.cells == FREE).sum()) == 5
    assert b.unknown_count() == 36 - 5
    assert belief.unknown_count() == 36  # input untouched


def test_update_is_idempotent():
    g = walled(10, 10)
    obs = observe(Pose(1.0, 1.0, 30), g)
    b1 = update_occupancy(OccupancyMap.like(g), obs)
    b2 = update_occupancy(b1, obs)
    assert np.array_equal(b1.cells, b2.cells)


def test_sweep_equals_union_of_raycasts():
    inner = ["........", "..##....", "..##....", "........", "....#...", "........"]
    g = walled(8, 10, inner)
    belief = OccupancyMap.like(g)
    seen = {}
    for cell in [(1, 1), (4, 6), (6, 2)]:
        x, y = g.center(*cell)
        for h in range(0, 360, 15):
            obs = observe(Pose(x, y, h), g, SensorConfig(90.0, 5.0))
            belief = update_occupancy(belief, obs)
            for r, c, s in obs.visible_cells:
                seen[(r, c)] = s
    known = {(int(r), int(c)) for r, c in np.argwhere(belief.cells != UNKNOWN)}
    assert known == set(seen)
    for (r, c), s in seen.items():
        assert belief.cells[r, c] == s == (2 if g.occupied[r, c] else 1)


def test_fully_observed_map_has_no_frontiers():
    g = walled(7, 7)
    assert detect_frontiers(OccupancyMap.from_truth(g)) == []


def test_corridor_boundary_is_one_frontier():
    cells = np.zeros((7, 9), dtype=np.int8)
    cells[2:5, 1:6] = FREE  # observed part of a 3-wide corridor
    k = 3
    fr = detect_frontiers(OccupancyMap(cells, 0.25), min_cluster=1)
    # the open end (column 5) plus the other free cells touching unknown
    want = frontiers_bruteforce(cells)
    assert len(fr) == len(want) == 1
    col5 = [m for m in fr[0].cells if m[1] == 5]
    assert len(col5) == k


def test_two_openings_give_two_frontiers():
    # known 2x7 room whose west and east walls each have an unseen gap
    g = walled(4, 9, ["......."] * 2)
    cells = OccupancyMap.from_truth(g).cells.copy()
    cells[1, 0] = UNKNOWN
    cells[2, 8] = UNKNOWN
    fr = detect_frontiers(OccupancyMap(cells, 0.25), min_cluster=1)
    assert len(fr) == 2
    assert [f.rep_cell for f in fr] == [r for _, r in frontiers_bruteforce(cells)] == [(1, 1), (2, 7)]


def _partial_map(rng):
    occ = random_grid(rng, 24, 24, 0.25)
    cells = np.where(occ, 2, 1).astype(np.int8)
    cells[rng.random(cells.shape) < rng.uniform(0.2, 0.7)] = UNKNOWN
    return cells


def test_frontiers_match_bruteforce_on_random_maps():
    rng = np.random.default_rng(11)
    for _ in range(60):
        cells = _partial_map(rng)
        got = detect_frontiers(OccupancyMap(cells, 0.25), min_cluster=1)
        want = frontiers_bruteforce(cells)
        assert [(frozenset(f.cells), f.rep_cell) for f in got] == want


def test_min_cluster_filters_small_groups():
    cells = _partial_map(np.random.default_rng(5))
    b = OccupancyMap(cells, 0.25)
    big = [f for f in detect_frontiers(b, 1) if len(f) >= 3]
    assert detect_frontiers(b, 3) == big


def test_project_frontier_is_identity_on_representative():
    cells = np.zeros((5, 5), dtype=np.int8)
    cells[2, 2] = FREE
    b = OccupancyMap(cells, 0.5)
    (f,) = detect_frontiers(b, min_cluster=1)
    assert f.cells == ((2, 2),)
    assert project_frontier(f) == (1.0, 1.0) == b.center(2, 2)


def test_projected_target_satisfies_frontier_predicate():
    rng = np.random.default_rng(2)
    for _ in range(20):
        cells = _partial_map(rng)
        b = OccupancyMap(cells, 0.25)
        mask = frontier_mask(cells)
        for f in detect_frontiers(b, 1):
            r, c = b.cell_of(*project_frontier(f))
            assert mask[r, c]


def test_mark_free_and_rows_round_trip():
    b = mark_free(OccupancyMap.empty(3, 4, 0.25), 1, 2)
    assert b.to_rows() == ["????", "??.?", "????"]
    assert np.array_equal(OccupancyMap.from_rows(b.to_rows(), 0.25).cells, b.cells)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_frontier_cells_are_free_and_touch_unknown(seed):
    cells = _partial_map(np.random.default_rng(seed))
    for f in detect_frontiers(OccupancyMap(cells, 0.25), 1):
        assert f.rep_cell in f.cells
        for r, c in f.cells:
            assert cells[r, c] == FREE
            nbrs = [cells[r + dr, c + dc] for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1))
                    if 0 <= r + dr < cells.shape[0] and 0 <= c + dc < cells.shape[1]]
            assert UNKNOWN in nbrs


def test_with_cells_rejects_bad_state():
    b = OccupancyMap.empty(2, 2, 0.25)
    with pytest.raises(ValueError):
        b.with_cells([0], [0], [7])
