"""Ground-truth world: grid, kinematics, sensing and scenario files.

Frame conventions
-----------------
* Cell ``(row, col)`` has its centre at ``(x, y) = (col * res, row * res)``;
  a continuous position maps to a cell by rounding.
* Heading 0 deg points along +x, counter-clockwise positive, so TurnLeft
  adds 15 deg. Row 0 is the first line of the scenario grid.
* The agent occupies a single cell (no footprint inflation).
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels

FORWARD_STEP_M = 0.25
TURN_DEG = 15
DEFAULT_MAX_STEPS = 500
DEFAULT_SUCCESS_RADIUS = 3.0
DEFAULT_RESOLUTION = 0.25

FREE = 1
OCCUPIED = 2


class Action(enum.Enum):
    MoveForward = "MoveForward"
    TurnLeft = "TurnLeft"
    TurnRight = "TurnRight"
    Stop = "Stop"


class ScenarioError(ValueError):
    """Raised for malformed or invalid scenario files."""


class EpisodeTerminated(RuntimeError):
    pass


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: int = 0

    def __post_init__(self) -> None:
        if self.heading % TURN_DEG != 0 or not 0 <= self.heading < 360:
            raise ValueError(f"heading must be a multiple of {TURN_DEG} in [0, 360), got {self.heading}")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class GroundTruthGrid:
    """Static occupancy. ``occupied`` is a bool array indexed [row, col]."""

    occupied: np.ndarray
    resolution: float = DEFAULT_RESOLUTION

    def __post_init__(self) -> None:
        occ = np.asarray(self.occupied, dtype=bool)
        if occ.ndim != 2 or occ.size == 0:
            raise ValueError("grid must be a non-empty 2-D array")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        occ = occ.copy()
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)
        occ_u8 = occ.astype(np.uint8)
        occ_u8.setflags(write=False)
        object.__setattr__(self, "_occ_u8", occ_u8)

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def occ_u8(self) -> np.ndarray:
        return self._occ_u8  # type: ignore[attr-defined]

    @property
    def passable(self) -> np.ndarray:
        return (~self.occupied).astype(np.uint8)

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return cell_of(x, y, self.resolution)

    def center(self, row: int, col: int) -> tuple[float, float]:
        return (col * self.resolution, row * self.resolution)

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def is_free(self, row: int, col: int) -> bool:
        return self.in_bounds(row, col) and not self.occupied[row, col]

    def walled(self) -> bool:
        o = self.occupied
        return bool(o[0, :].all() and o[-1, :].all() and o[:, 0].all() and o[:, -1].all())

    @classmethod
    def from_rows(cls, rows: Sequence[str], resolution: float = DEFAULT_RESOLUTION) -> "GroundTruthGrid":
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError("grid rows must all have the same length")
        bad = {ch for r in rows for ch in r} - {"#", "."}
        if bad:
            raise ValueError(f"grid may only contain '#' and '.', found {sorted(bad)}")
        return cls(np.array([[ch == "#" for ch in r] for r in rows], dtype=bool), resolution)

    def to_rows(self) -> list[str]:
        return ["".join("#" if v else "." for v in row) for row in self.occupied]


def cell_of(x: float, y: float, res: float) -> tuple[int, int]:
    return (int(math.floor(y / res + 0.5)), int(math.floor(x / res + 0.5)))


@dataclass(frozen=True)
class EpisodeSpec:
    grid: GroundTruthGrid
    start: Pose
    goal: tuple[float, float]
    instruction: str = ""
    max_steps: int = DEFAULT_MAX_STEPS
    success_radius: float = DEFAULT_SUCCESS_RADIUS
    reference_path: tuple[tuple[float, float], ...] | None = None
    name: str = ""

    def validate(self) -> "EpisodeSpec":
        g = self.grid
        if not g.walled():
            raise ScenarioError("grid boundary must be occupied (walled world)")
        if not g.is_free(*g.cell_of(*self.start.position)):
            raise ScenarioError("start not free")
        if not g.is_free(*g.cell_of(*self.goal)):
            raise ScenarioError("goal not free")
        if self.max_steps < 1:
            raise ScenarioError("max_steps must be >= 1")
        if not self.success_radius > 0:
            raise ScenarioError("success_radius_m must be positive")
        return self


@dataclass(frozen=True)
class SensorConfig:
    fov_deg: float = 90.0
    range_m: float = 5.0


@dataclass(frozen=True)
class Observation:
    pose: Pose
    visible_cells: tuple[tuple[int, int, int], ...]  # (row, col, FREE|OCCUPIED)


@dataclass(frozen=True)
class AgentState:
    pose: Pose
    max_steps: int = DEFAULT_MAX_STEPS
    steps: int = 0
    stopped: bool = False
    collision: bool = False

    @property
    def terminated(self) -> bool:
        return self.stopped or self.steps >= self.max_steps


def initial_state(spec: EpisodeSpec) -> AgentState:
    return AgentState(pose=spec.start, max_steps=spec.max_steps)


def step(state: AgentState, action: Action, grid: GroundTruthGrid) -> AgentState:
    """Apply one action. Blocked forward moves leave the pose unchanged."""
    if state.terminated:
        raise EpisodeTerminated("episode already terminated")
    pose = state.pose
    n = state.steps + 1
    if action is Action.TurnLeft:
        return replace(state, pose=replace(pose, heading=(pose.heading + TURN_DEG) % 360), steps=n, collision=False)
    if action is Action.TurnRight:
        return replace(state, pose=replace(pose, heading=(pose.heading - TURN_DEG) % 360), steps=n, collision=False)
    if action is Action.Stop:
        return replace(state, steps=n, stopped=True, collision=False)
    rad = math.radians(pose.heading)
    nx = pose.x + FORWARD_STEP_M * math.cos(rad)
    ny = pose.y + FORWARD_STEP_M * math.sin(rad)
    if grid.is_free(*grid.cell_of(nx, ny)):
        return replace(state, pose=replace(pose, x=nx, y=ny), steps=n, collision=False)
    return replace(state, steps=n, collision=True)


def is_success(state: AgentState, spec: EpisodeSpec) -> bool:
    if not state.terminated:
        raise EpisodeTerminated("is_success called before termination")
    d = math.hypot(state.pose.x - spec.goal[0], state.pose.y - spec.goal[1])
    return state.stopped and d <= spec.success_radius and state.steps <= spec.max_steps


def observe(state: AgentState | Pose, grid: GroundTruthGrid, sensor: SensorConfig = SensorConfig()) -> Observation:
    pose = state.pose if isinstance(state, AgentState) else state
    cells = kernels.visible_cells(
        grid.occ_u8, float(pose.x), float(pose.y), float(pose.heading),
        float(sensor.fov_deg), float(sensor.range_m), float(grid.resolution),
    )
    occ = grid.occupied
    vis = tuple((int(r), int(c), OCCUPIED if occ[r, c] else FREE) for r, c in cells)
    return Observation(pose=pose, visible_cells=vis)


# -- scenario files ---------------------------------------------------------

_REQUIRED = ("grid", "resolution_m", "start", "goal", "instruction")
_OPTIONAL = ("max_steps", "success_radius_m", "reference_path", "name")


def _num(obj: dict, key: str, where: str) -> float:
    if key not in obj:
        raise ScenarioError(f"{where}: missing field '{key}'")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}.{key}: expected a number, got {type(v).__name__}")
    return float(v)


def _strict_keys(obj: object, allowed: Sequence[str], where: str) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ScenarioError(f"{where}: unknown field '{extra[0]}'")
    return obj


def parse_scenario(data: dict) -> EpisodeSpec:
    top = _strict_keys(data, _REQUIRED + _OPTIONAL, "scenario")
    for k in _REQUIRED:
        if k not in top:
            raise ScenarioError(f"scenario: missing field '{k}'")
    rows = top["grid"]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, str) for r in rows):
        raise ScenarioError("scenario.grid: expected a non-empty list of strings")
    res = _num(top, "resolution_m", "scenario")
    try:
        grid = GroundTruthGrid.from_rows(rows, res)
    except ValueError as exc:
        raise ScenarioError(f"scenario.grid: {exc}") from None
    start = _strict_keys(top["start"], ("x", "y", "heading"), "scenario.start")
    heading = int(_num(start, "heading", "scenario.start")) if "heading" in start else 0
    if heading % TURN_DEG or not 0 <= heading < 360:
        raise ScenarioError(f"scenario.start.heading: must be a multiple of {TURN_DEG} in [0, 360)")
    goal = _strict_keys(top["goal"], ("x", "y"), "scenario.goal")
    instruction = top["instruction"]
    if not isinstance(instruction, str):
        raise ScenarioError("scenario.instruction: expected a string")
    ref = top.get("reference_path")
    if ref is not None:
        try:
            ref = tuple((float(p[0]), float(p[1])) for p in ref)
        except (TypeError, ValueError, IndexError):
            raise ScenarioError("scenario.reference_path: expected a list of [x, y] pairs") from None
        if not ref:
            raise ScenarioError("scenario.reference_path: must not be empty")
    max_steps = top.get("max_steps", DEFAULT_MAX_STEPS)
    if isinstance(max_steps, bool) or not isinstance(max_steps, int):
        raise ScenarioError("scenario.max_steps: expected an integer")
    spec = EpisodeSpec(
        grid=grid,
        start=Pose(_num(start, "x", "scenario.start"), _num(start, "y", "scenario.start"), heading),
        goal=(_num(goal, "x", "scenario.goal"), _num(goal, "y", "scenario.goal")),
        instruction=instruction,
        max_steps=max_steps,
        success_radius=float(top.get("success_radius_m", DEFAULT_SUCCESS_RADIUS)),
        reference_path=ref,
        name=str(top.get("name", "")),
    )
    return spec.validate()


def load_scenario(path: str | Path) -> EpisodeSpec:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        spec = parse_scenario(data)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    return spec if spec.name else replace(spec, name=path.stem)


def scenario_to_dict(spec: EpisodeSpec) -> dict:
    out: dict = {
        "grid": spec.grid.to_rows(),
        "resolution_m": spec.grid.resolution,
        "start": {"x": spec.start.x, "y": spec.start.y, "heading": spec.start.heading},
        "goal": {"x": spec.goal[0], "y": spec.goal[1]},
        "instruction": spec.instruction,
        "max_steps": spec.max_steps,
        "success_radius_m": spec.success_radius,
    }
    if spec.name:
        out["name"] = spec.name
    if spec.reference_path is not None:
        out["reference_path"] = [list(p) for p in spec.reference_path]
    return out


def dump_scenario(spec: EpisodeSpec) -> str:
    return json.dumps(scenario_to_dict(spec), indent=1, sort_keys=True) + "\n"


def save_scenario(spec: EpisodeSpec, path: str | Path) -> None:
    Path(path).write_text(dump_scenario(spec), encoding="utf-8")
