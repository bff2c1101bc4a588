"""Scripted System-1 stand-in: geodesic follower with junction mistakes.

The policy reads ground truth by design. It follows the shortest path to
the goal, and on arriving at a junction (a cell with at least three free
4-neighbours in its belief map) it takes a wrong branch with probability
``p_err``. A wrong branch is followed until the next junction, where
goal-following resumes. Reaching a dead end while astray ends the episode
with Stop when ``stop_at_dead_end`` is set: the agent takes the dead end
for the one its instruction ends at. Otherwise it turns round and resumes.

Junction outcomes are drawn from a generator seeded by (episode seed,
junction cell, visit number), so the same junction visit errs the same
way regardless of what happened earlier in the episode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..mapping import OccupancyMap, mark_free, update_occupancy
from ..planner import geodesic_field
from ..world import FREE, TURN_DEG, Action, EpisodeSpec, Observation, Pose
from .base import DEFAULT_MAX_CHUNK

_FOUR = ((-1, 0), (0, -1), (0, 1), (1, 0))
_EIGHT = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
HEADING_TOL = 7.5


@dataclass(frozen=True)
class JunctionDecision:
    cell: tuple[int, int]
    visit: int
    wrong: bool
    chosen: tuple[int, int]
    correct: tuple[int, int]


def junction_draw(seed: int, cell: tuple[int, int], visit: int) -> tuple[float, float]:
    u = np.random.default_rng([seed, cell[0], cell[1], visit]).random(2)
    return float(u[0]), float(u[1])


def turn_plan(pose: Pose, target: tuple[float, float], max_chunk: int) -> list[Action]:
    """Turns toward ``target`` then one forward move, at most ``max_chunk`` actions."""
    desired = math.degrees(math.atan2(target[1] - pose.y, target[0] - pose.x))
    delta = (desired - pose.heading + 540.0) % 360.0 - 180.0
    n = int(math.floor(abs(delta) / TURN_DEG + 0.5))
    if abs(delta) - n * TURN_DEG > HEADING_TOL:
        n += 1
    turn = Action.TurnLeft if delta > 0 else Action.TurnRight
    actions = [turn] * min(n, max_chunk)
    if len(actions) < max_chunk:
        actions.append(Action.MoveForward)
    return actions


class ScriptedFastPolicy:
    def __init__(self, p_err: float = 0.25, max_chunk: int = DEFAULT_MAX_CHUNK, stop_at_dead_end: bool = True):
        if not 0.0 <= p_err <= 1.0:
            raise ValueError("p_err must lie in [0, 1]")
        if max_chunk < 1:
            raise ValueError("max_chunk must be >= 1")
        self.p_err = p_err
        self.max_chunk = max_chunk
        self.stop_at_dead_end = stop_at_dead_end
        self.decisions: list[JunctionDecision] = []

    def reset(self, spec: EpisodeSpec, seed: int) -> None:
        self.spec = spec
        self.seed = int(seed)
        grid = spec.grid
        self._truth_free = ~grid.occupied
        goal_cell = grid.cell_of(*spec.goal)
        self._field = geodesic_field(grid.passable, goal_cell, grid.resolution)
        self._belief = OccupancyMap.like(grid)
        self._cell: tuple[int, int] | None = None
        self._came_from: tuple[int, int] | None = None
        self._next: tuple[int, int] | None = None
        self._astray: tuple[int, int] | None = None
        self._visits: dict[tuple[int, int], int] = {}
        self.decisions = []
        self.last_decision: JunctionDecision | None = None
        self._skip_arrival = False
        self._lost_stop = False

    def interrupt(self) -> None:
        self._astray = None
        self._came_from = None
        self._next = None
        self._cell = None
        self._skip_arrival = True

    # -- helpers ----------------------------------------------------------

    def _truth_ok(self, r: int, c: int) -> bool:
        h, w = self._truth_free.shape
        return 0 <= r < h and 0 <= c < w and bool(self._truth_free[r, c])

    def _belief_free_4(self, cell: tuple[int, int]) -> list[tuple[int, int]]:
        r, c = cell
        return [(r + dr, c + dc) for dr, dc in _FOUR if self._belief.state(r + dr, c + dc) == FREE]

    def _geodesic_next(self, cell: tuple[int, int]) -> tuple[int, int] | None:
        r, c = cell
        best, best_cost = None, self._field[r, c]
        for dr, dc in _EIGHT:
            nr, nc = r + dr, c + dc
            if not self._truth_ok(nr, nc):
                continue
            if dr and dc and not (self._truth_ok(r, nc) and self._truth_ok(nr, c)):
                continue
            step = math.sqrt(2.0) if dr and dc else 1.0
            cost = self._field[nr, nc] + step * self.spec.grid.resolution
            # strictly downhill on the distance field
            if self._field[nr, nc] < self._field[r, c] and (best is None or cost < best_cost):
                best, best_cost = (nr, nc), cost
        return best

    def _arrive(self, cell: tuple[int, int]) -> None:
        prev = self._cell
        self._cell = cell
        if prev is not None and max(abs(prev[0] - cell[0]), abs(prev[1] - cell[1])) == 1:
            self._came_from = prev
        else:
            self._came_from = None
        self.last_decision = None
        free4 = self._belief_free_4(cell)
        junction = len(free4) >= 3
        if self._astray is not None:
            r, c = cell
            ahead = (r + self._astray[0], c + self._astray[1])
            options = [
                (r + dr, c + dc) for dr, dc in _FOUR
                if self._truth_ok(r + dr, c + dc) and (r + dr, c + dc) != self._came_from
            ]
            if not junction and options:
                nxt = ahead if ahead in options else options[0]
                self._astray = (nxt[0] - r, nxt[1] - c)
                self._next = nxt
                return
            self._astray = None
            if not options and self.stop_at_dead_end:
                self._lost_stop = True
                return
        correct = self._geodesic_next(cell)
        self._next = correct
        if not junction or correct is None:
            return
        options = [n for n in free4 if n != self._came_from]
        if correct not in options or len(options) < 2:
            return
        visit = self._visits.get(cell, 0) + 1
        self._visits[cell] = visit
        u, v = junction_draw(self.seed, cell, visit)
        wrong = u < self.p_err
        chosen = correct
        if wrong:
            others = [n for n in options if n != correct]
            chosen = others[min(int(v * len(others)), len(others) - 1)]
            self._astray = (chosen[0] - cell[0], chosen[1] - cell[1])
            self._next = chosen
        d = JunctionDecision(cell=cell, visit=visit, wrong=wrong, chosen=chosen, correct=correct)
        self.decisions.append(d)
        self.last_decision = d

    # -- policy -----------------------------------------------------------

    def decide(self, history: Sequence[Observation], instruction: str = "") -> list[Action]:
        if not history:
            raise ValueError("decide needs at least the current observation")
        for obs in history:
            self._belief = update_occupancy(self._belief, obs)
            self._belief = mark_free(self._belief, *self._belief.cell_of(obs.pose.x, obs.pose.y))
        pose = history[-1].pose
        gx, gy = self.spec.goal
        if math.hypot(pose.x - gx, pose.y - gy) <= self.spec.success_radius:
            return [Action.Stop]
        cell = self._belief.cell_of(pose.x, pose.y)
        if cell != self._cell:
            if self._skip_arrival:
                self._skip_arrival = False
                self._cell = cell
                self._came_from = None
                self._next = self._geodesic_next(cell)
                self.last_decision = None
            else:
                self._arrive(cell)
        else:
            self.last_decision = None
        if self._lost_stop:
            return [Action.Stop]
        if self._next is None:
            self._next = self._geodesic_next(cell)
        if self._next is None:
            # unreachable goal: idle in place
            return [Action.TurnLeft]
        target = self.spec.grid.center(*self._next)
        return turn_plan(pose, target, self.max_chunk)
