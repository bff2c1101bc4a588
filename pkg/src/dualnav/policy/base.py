"""Interfaces shared by fast policies and slow planners."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

from ..mapping import Frontier, OccupancyMap
from ..planner import PlannedPath
from ..views import RenderedView
from ..world import Action, EpisodeSpec, Observation, Pose

DEFAULT_MAX_CHUNK = 4


class SlowPlannerError(Exception):
    """Base class for every slow-planner failure the scheduler recovers from."""


class NoCandidates(SlowPlannerError):
    pass


class TransportError(SlowPlannerError):
    pass


class PlannerTimeout(SlowPlannerError):
    pass


class MalformedReply(SlowPlannerError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class InvalidSelection(SlowPlannerError):
    def __init__(self, label: str, n_candidates: int):
        super().__init__(f"selected waypoint {label!r} not among F1..F{n_candidates}")
        self.label = label
        self.n_candidates = n_candidates


def label_for(index: int) -> str:
    return f"F{index + 1}"


@dataclass(frozen=True)
class FrontierChoice:
    selected_index: int
    reasoning: str = ""

    @property
    def selected_label(self) -> str:
        return label_for(self.selected_index)

    def to_dict(self) -> dict:
        return {
            "selected_index": self.selected_index,
            "selected_label": self.selected_label,
            "reasoning": self.reasoning,
        }


@dataclass(frozen=True)
class EnvSummary:
    location: str
    relationship: str
    possible_directions: str

    def to_wire(self) -> dict:
        return {
            "Location": self.location,
            "Relationship": self.relationship,
            "Possible directions": self.possible_directions,
        }


@dataclass(frozen=True)
class Candidate:
    """One frontier offered to the slow planner, with its rendered path."""

    label: str
    frontier: Frontier
    target: tuple[float, float]
    path: PlannedPath
    views: tuple[RenderedView, ...] = field(default=(), repr=False)
    kept: tuple[int, ...] = ()

    @property
    def kept_views(self) -> tuple[RenderedView, ...]:
        return tuple(self.views[i] for i in self.kept)


@runtime_checkable
class FastPolicy(Protocol):
    max_chunk: int

    def reset(self, spec: EpisodeSpec, seed: int) -> None: ...

    def decide(self, history: Sequence[Observation], instruction: str) -> list[Action]:
        """Return 1..max_chunk actions given observations since the last call."""
        ...

    def interrupt(self) -> None:
        """Control is returning after the agent was moved by waypoint execution."""
        ...


@runtime_checkable
class SlowPlanner(Protocol):
    def plan(self, topdown: OccupancyMap, candidates: Sequence[Candidate], instruction: str) -> FrontierChoice: ...


def nearest_frontier(candidates: Sequence[Candidate]) -> FrontierChoice:
    """Fallback choice: lowest A* path cost, ties to the lowest index."""
    if not candidates:
        raise NoCandidates("no frontier candidates")
    best = min(range(len(candidates)), key=lambda i: (candidates[i].path.cost, i))
    return FrontierChoice(best, "fallback: nearest frontier by path cost")


def planner_wants_stop(planner: object, pose: Pose) -> bool:
    fn = getattr(planner, "should_stop", None)
    return bool(fn(pose)) if fn is not None else False
