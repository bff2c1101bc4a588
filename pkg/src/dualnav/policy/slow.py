"""In-process slow planners: ground-truth oracle and a latency stub."""
from __future__ import annotations

import math
import time
from typing import Sequence

import numpy as np

from ..mapping import OccupancyMap
from ..planner import geodesic_field
from ..world import EpisodeSpec, Pose
from .base import Candidate, FrontierChoice, NoCandidates


class OracleSlowPlanner:
    """Picks the candidate whose frontier is geodesically closest to the goal.

    Upper-bound stand-in for the multimodal planner; reads ground truth.
    A frontier only counts if it is closer to the goal than the agent is
    (the agent stands at ``path.nodes[0]``); with none left it raises
    NoCandidates rather than pull the agent into a dead end.
    """

    reasoning = "oracle geodesic"

    def reset(self, spec: EpisodeSpec) -> None:
        self.spec = spec
        grid = spec.grid
        self._field = geodesic_field(grid.passable, grid.cell_of(*spec.goal), grid.resolution)

    def geodesic_to_goal(self, point: tuple[float, float]) -> float:
        r, c = self.spec.grid.cell_of(*point)
        if not self.spec.grid.in_bounds(r, c):
            return math.inf
        return float(self._field[r, c])

    def plan(self, topdown: OccupancyMap, candidates: Sequence[Candidate], instruction: str = "") -> FrontierChoice:
        if not candidates:
            raise NoCandidates("no frontier candidates")
        dists = [self.geodesic_to_goal(c.target) for c in candidates]
        best = int(np.argmin(dists))  # first minimum = lowest index
        here = self.geodesic_to_goal(candidates[best].path.nodes[0])
        if not dists[best] < here:
            raise NoCandidates("no frontier leads closer to the goal")
        return FrontierChoice(best, self.reasoning)

    def should_stop(self, pose: Pose) -> bool:
        """Stop rule for slow-only runs, where no fast policy can issue Stop."""
        gx, gy = self.spec.goal
        return math.hypot(pose.x - gx, pose.y - gy) <= self.spec.success_radius


class StubLatencyPlanner:
    """Wraps a planner and adds a fixed wall-clock delay per call."""

    def __init__(self, inner, delay_s: float = 0.01):
        self.inner = inner
        self.delay_s = delay_s

    def reset(self, spec: EpisodeSpec) -> None:
        if hasattr(self.inner, "reset"):
            self.inner.reset(spec)

    def plan(self, topdown: OccupancyMap, candidates: Sequence[Candidate], instruction: str = "") -> FrontierChoice:
        time.sleep(self.delay_s)
        return self.inner.plan(topdown, candidates, instruction)

    def should_stop(self, pose: Pose) -> bool:
        fn = getattr(self.inner, "should_stop", None)
        return bool(fn(pose)) if fn else False
