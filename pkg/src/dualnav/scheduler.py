"""Fast/slow coordination loop.

Slow-planner latency is logical: a request issued after fast step ``n``
is answered after fast step ``n + latency_l``. The planner itself runs on
a single worker thread; if its answer is not ready when due, the loop
waits for it, so traces never depend on thread timing.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .mapping import OccupancyMap, detect_frontiers, mark_free, update_occupancy
from .planner import (
    InterpolationConfig,
    PlanningError,
    astar,
    greedy_action,
    interpolate,
    project_frontier,
)
from .policy.base import (
    Candidate,
    FrontierChoice,
    InvalidSelection,
    NoCandidates,
    label_for,
    nearest_frontier,
    planner_wants_stop,
)
from .views import ViewConfig, embed_many, prune, render_views
from .world import (
    Action,
    AgentState,
    EpisodeSpec,
    Observation,
    Pose,
    SensorConfig,
    initial_state,
    is_success,
    load_scenario,
    observe,
    step,
)

log = logging.getLogger(__name__)

EVENT_KINDS = (
    "fast_action",
    "slow_request",
    "slow_arrival",
    "waypoint_begin",
    "waypoint_step",
    "waypoint_end",
    "fallback",
    "stop",
)


@dataclass(frozen=True)
class ScheduleConfig:
    ratio_k: int = 20
    latency_l: int = 8
    waypoint_follow: Literal["strict", "replan_on_block"] = "strict"
    d: float = 0.5
    tau: float = 0.92
    prune_mode: Literal["last_kept", "consecutive"] = "last_kept"
    patch_size: int = 16
    # corridor frontiers in 1-cell-wide mazes are single cells
    frontier_min_cluster: int = 1
    sensor: SensorConfig = SensorConfig()
    # 4-neighbourhood: a diagonal neighbour at a bend cannot see round the corner
    reach_cells: int = 1
    heading_tol_deg: float = 7.5

    def __post_init__(self) -> None:
        if self.ratio_k < 1:
            raise ValueError("ratio_k must be >= 1")
        if self.latency_l < 0:
            raise ValueError("latency_l must be >= 0")
        if self.latency_l >= self.ratio_k:
            raise ValueError("latency_l must be smaller than ratio_k")
        if self.waypoint_follow not in ("strict", "replan_on_block"):
            raise ValueError(f"unknown waypoint_follow {self.waypoint_follow!r}")
        if not self.d > 0:
            raise ValueError("d must be positive")
        if not -1.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (-1, 1]")

    def to_dict(self) -> dict:
        return {
            "ratio_k": self.ratio_k,
            "latency_l": self.latency_l,
            "waypoint_follow": self.waypoint_follow,
            "d": self.d,
            "tau": self.tau,
            "prune_mode": self.prune_mode,
            "patch_size": self.patch_size,
            "frontier_min_cluster": self.frontier_min_cluster,
            "fov_deg": self.sensor.fov_deg,
            "range_m": self.sensor.range_m,
            "reach_cells": self.reach_cells,
            "heading_tol_deg": self.heading_tol_deg,
        }


@dataclass(frozen=True)
class TraceEvent:
    step: int
    kind: str
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"step": self.step, "kind": self.kind, **self.data}


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    final_pose: Pose
    step_count: int
    path: tuple[tuple[float, float], ...]
    wall_time: float
    trace: tuple[TraceEvent, ...]
    belief: OccupancyMap | None = None
    seed: int = 0
    scenario: str = ""
    mode: str = "dual"
    error: str | None = None

    def events(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.trace if e.kind == kind]


def _pose_list(p: Pose) -> list:
    return [p.x, p.y, p.heading]


def _reachable_target(belief: OccupancyMap, pose: Pose, f) -> tuple[tuple[float, float], object] | None:
    """Plan to the frontier's representative, else to its nearest reachable member.

    Clusters are 8-connected, so the representative can sit across a
    blocked diagonal from the side the agent can reach.
    """
    target = project_frontier(f)
    try:
        return target, astar(belief, pose.position, target)
    except PlanningError:
        pass
    rr, rc = f.rep_cell
    for r, c in sorted(f.cells, key=lambda m: ((m[0] - rr) ** 2 + (m[1] - rc) ** 2, m)):
        if (r, c) == (rr, rc):
            continue
        alt = belief.center(r, c)
        try:
            return alt, astar(belief, pose.position, alt)
        except PlanningError:
            continue
    return None


def build_candidates(belief: OccupancyMap, pose: Pose, cfg: ScheduleConfig) -> list[Candidate]:
    """Frontiers -> A* paths -> interpolation -> views -> pruning."""
    interp = InterpolationConfig(cfg.d)
    vcfg = ViewConfig(cfg.patch_size)
    out: list[Candidate] = []
    for f in detect_frontiers(belief, cfg.frontier_min_cluster):
        found = _reachable_target(belief, pose, f)
        if found is None:
            continue
        target, raw = found
        path = interpolate(raw, interp)
        views = render_views(belief, path, vcfg, pose.heading)
        kept = prune(views, embed_many(views), cfg.tau, cfg.prune_mode)
        out.append(Candidate(label_for(len(out)), f, target, path, tuple(views), tuple(kept)))
    return out


@dataclass
class _Pending:
    request: int
    due: int
    future: Future | None
    candidates: list[Candidate]


class _Episode:
    def __init__(self, spec: EpisodeSpec, fast, slow, cfg: ScheduleConfig, seed: int, pool: ThreadPoolExecutor | None):
        self.spec = spec
        self.fast = fast
        self.slow = slow
        self.cfg = cfg
        self.seed = seed
        self.pool = pool
        self.grid = spec.grid
        self.state: AgentState = initial_state(spec)
        self.belief = OccupancyMap.like(spec.grid)
        self.events: list[TraceEvent] = []
        self.path: list[tuple[float, float]] = [spec.start.position]
        self.history: list[Observation] = []
        self.fast_count = 0
        self.n_requests = 0
        self.pending: _Pending | None = None
        self._sense()

    # -- primitives -------------------------------------------------------

    def _sense(self) -> None:
        obs = observe(self.state, self.grid, self.cfg.sensor)
        self.belief = update_occupancy(self.belief, obs)
        self.belief = mark_free(self.belief, *self.grid.cell_of(self.state.pose.x, self.state.pose.y))
        self.history.append(obs)

    def _emit(self, kind: str, **data) -> None:
        self.events.append(TraceEvent(self.state.steps, kind, data))

    def _apply(self, action: Action, kind: str, **extra) -> None:
        self.state = step(self.state, action, self.grid)
        if action is not Action.Stop:
            self._sense()
        self.path.append(self.state.pose.position)
        self._emit(kind, action=action.value, pose=_pose_list(self.state.pose),
                   collision=self.state.collision, **extra)

    @property
    def done(self) -> bool:
        return self.state.terminated

    # -- slow planning ----------------------------------------------------

    def _request(self, submit: bool = True) -> None:
        rid = self.n_requests
        self.n_requests += 1
        snapshot = self.belief
        pose = self.state.pose
        cands = build_candidates(snapshot, pose, self.cfg)
        self._emit(
            "slow_request",
            request=rid,
            fast_step=self.fast_count,
            candidates=[
                {
                    "label": c.label,
                    "target": list(c.target),
                    "cost": c.path.cost,
                    "n_views": len(c.views),
                    "kept": list(c.kept),
                }
                for c in cands
            ],
        )
        future = None
        if cands and submit:
            future = self.pool.submit(self.slow.plan, snapshot, cands, self.spec.instruction)
        self.pending = _Pending(rid, self.fast_count + self.cfg.latency_l, future, cands)

    def _resolve(self) -> Candidate | None:
        p = self.pending
        self.pending = None
        if p.future is None:
            self._emit("fallback", request=p.request, reason="NoCandidates", selected_index=None)
            return None
        try:
            choice: FrontierChoice = p.future.result()
            if not 0 <= choice.selected_index < len(p.candidates):
                raise InvalidSelection(choice.selected_label, len(p.candidates))
        except NoCandidates:
            # the planner found nothing worth visiting: no waypoint this round
            self._emit("fallback", request=p.request, reason="NoCandidates", selected_index=None)
            return None
        except Exception as exc:  # every other planner failure resolves to the fallback
            choice = nearest_frontier(p.candidates)
            detail = getattr(exc, "field", None) or getattr(exc, "label", None)
            self._emit("fallback", request=p.request, reason=type(exc).__name__, detail=detail,
                       selected_index=choice.selected_index)
            log.debug("slow planner failed (%s); falling back", exc)
            return p.candidates[choice.selected_index]
        self._emit("slow_arrival", request=p.request, selected_index=choice.selected_index,
                   selected_label=choice.selected_label, reasoning=choice.reasoning)
        return p.candidates[choice.selected_index]

    def _abandon_pending(self) -> None:
        if self.pending is not None:
            p = self.pending
            self.pending = None
            if p.future is not None:
                p.future.cancel()
            self._emit("fallback", request=p.request, reason="terminated", selected_index=None)

    # -- waypoint execution ----------------------------------------------

    def _waypoint(self, cand: Candidate, request: int) -> None:
        target_cell = self.grid.cell_of(*cand.target)
        try:
            path = astar(self.belief, self.state.pose.position, cand.target)
            cells = list(path.cells)
        except PlanningError:
            cells = []
        self._emit("waypoint_begin", request=request, label=cand.label, target=list(cand.target),
                   path=[list(self.grid.center(r, c)) for r, c in cells])
        if not cells:
            self._emit("waypoint_end", request=request, reason="unreachable")
            return
        guard = 4 * len(cells) + 24
        replanned = False
        idx = 1
        n = 0
        while True:
            if self.done:
                self._emit("waypoint_end", request=request, reason="budget")
                return
            cur = self.grid.cell_of(self.state.pose.x, self.state.pose.y)
            if abs(cur[0] - target_cell[0]) + abs(cur[1] - target_cell[1]) <= self.cfg.reach_cells:
                self._emit("waypoint_end", request=request, reason="reached")
                return
            if n >= guard:
                self._emit("waypoint_end", request=request, reason="stalled")
                return
            for j in range(len(cells) - 1, idx - 1, -1):
                if cells[j] == cur:
                    idx = j + 1
                    break
            nxt = cells[min(idx, len(cells) - 1)]
            action = greedy_action(self.state.pose, self.grid.center(*nxt), self.cfg.heading_tol_deg)
            self._apply(action, "waypoint_step")
            n += 1
            if self.state.collision:
                if self.cfg.waypoint_follow == "strict" or replanned:
                    self._emit("waypoint_end", request=request, reason="blocked")
                    return
                replanned = True
                try:
                    cells = list(astar(self.belief, self.state.pose.position, cand.target).cells)
                    idx = 1
                except PlanningError:
                    self._emit("waypoint_end", request=request, reason="unreachable")
                    return

    # -- loops -------------------------------------------------------------

    def run_dual(self) -> None:
        k, lat = self.cfg.ratio_k, self.cfg.latency_l
        max_chunk = getattr(self.fast, "max_chunk", 4)
        while not self.done:
            actions = self.fast.decide(self.history, self.spec.instruction)
            self.history = []
            if not actions or len(actions) > max_chunk:
                raise ValueError(f"fast policy returned {len(actions)} actions (max {max_chunk})")
            junction = getattr(self.fast, "last_decision", None)
            for i, action in enumerate(actions):
                if not isinstance(action, Action):
                    raise TypeError(f"fast policy returned {action!r}")
                if action is Action.Stop:
                    self._apply(action, "stop")
                    break
                extra = {}
                if i == 0 and junction is not None:
                    extra["junction"] = {"cell": list(junction.cell), "visit": junction.visit, "wrong": junction.wrong}
                self._apply(action, "fast_action", **extra)
                self.fast_count += 1
                target = rid = None
                if self.pending is not None and self.fast_count == self.pending.due:
                    if not self.done:
                        rid = self.pending.request
                        target = self._resolve()
                elif self.slow is not None and self.pending is None and self.fast_count % k == 0:
                    # cadence is fixed by the fast-step count, even on the final step
                    self._request(submit=not self.done)
                    if lat == 0 and not self.done:
                        rid = self.pending.request
                        target = self._resolve()
                if self.done:
                    break
                if target is None:
                    continue
                self._waypoint(target, rid)
                if hasattr(self.fast, "interrupt"):
                    self.fast.interrupt()
                break
        self._abandon_pending()

    def run_slow_only(self) -> None:
        while not self.done:
            if planner_wants_stop(self.slow, self.state.pose):
                self._apply(Action.Stop, "stop")
                break
            self._request()
            rid = self.pending.request
            for _ in range(self.cfg.latency_l):
                if self.done:
                    break
                self._apply(Action.TurnLeft, "fast_action", filler=True)
            if self.done:
                break
            target = self._resolve()
            if target is not None:
                self._waypoint(target, rid)
            # without a target the filler rotation has still refreshed the map
        self._abandon_pending()


def run_episode(
    spec: EpisodeSpec,
    fast,
    slow=None,
    cfg: ScheduleConfig = ScheduleConfig(),
    seed: int = 0,
) -> EpisodeResult:
    """Run one episode.

    ``slow=None`` gives the fast-only loop; ``fast=None`` gives the
    slow-only loop (request, rotate in place while waiting, execute).
    """
    if fast is None and slow is None:
        raise ValueError("need a fast policy, a slow planner, or both")
    t0 = time.perf_counter()
    if fast is not None:
        fast.reset(spec, seed)
    if slow is not None and hasattr(slow, "reset"):
        slow.reset(spec)
    pool = ThreadPoolExecutor(max_workers=1, thread_name_prefix="slow-planner") if slow is not None else None
    ep = _Episode(spec, fast, slow, cfg, seed, pool)
    try:
        if fast is None:
            mode = "slow"
            ep.run_slow_only()
        else:
            mode = "dual" if slow is not None else "fast"
            ep.run_dual()
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    wall = time.perf_counter() - t0
    return EpisodeResult(
        success=is_success(ep.state, spec),
        final_pose=ep.state.pose,
        step_count=ep.state.steps,
        path=tuple(ep.path),
        wall_time=wall,
        trace=tuple(ep.events),
        belief=ep.belief,
        seed=seed,
        scenario=spec.name,
        mode=mode,
    )


def scenario_paths(scenario_dir: str | Path) -> list[Path]:
    p = Path(scenario_dir)
    if p.is_file():
        return [p]
    return sorted(p.glob("*.json"))


def run_suite(
    scenarios: str | Path | Sequence[EpisodeSpec],
    fast_factory,
    slow_factory=None,
    cfg: ScheduleConfig = ScheduleConfig(),
    seeds: Iterable[int] = (0,),
) -> list[EpisodeResult]:
    """Run every (scenario, seed) pair in scenario-then-seed order.

    Factories build fresh policy objects per episode (``None`` disables a
    system). A failing episode is recorded with ``error`` set and the
    suite continues.
    """
    seeds = list(seeds)
    if isinstance(scenarios, (str, Path)):
        specs: list[EpisodeSpec | Exception] = []
        for path in scenario_paths(scenarios):
            try:
                specs.append(load_scenario(path))
            except Exception as exc:
                specs.append(exc)
    else:
        specs = list(scenarios)
    results = []
    for spec in specs:
        for seed in seeds:
            if isinstance(spec, Exception):
                results.append(_failed(str(spec), seed, spec))
                continue
            try:
                fast = fast_factory() if fast_factory is not None else None
                slow = slow_factory() if slow_factory is not None else None
                results.append(run_episode(spec, fast, slow, cfg, seed))
            except Exception as exc:
                log.exception("episode %s seed %d failed", spec.name, seed)
                results.append(_failed(spec.name, seed, exc, spec))
    return results


def _failed(name: str, seed: int, exc: Exception, spec: EpisodeSpec | None = None) -> EpisodeResult:
    pose = spec.start if spec is not None else Pose(0.0, 0.0, 0)
    return EpisodeResult(
        success=False, final_pose=pose, step_count=0, path=(pose.position,), wall_time=0.0,
        trace=(), seed=seed, scenario=name, error=f"{type(exc).__name__}: {exc}",
    )


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def slow_outcomes(trace: Sequence[TraceEvent]) -> list[dict]:
    """How each slow request ended, in order: the choice received or the fallback taken."""
    out = []
    for e in trace:
        if e.kind == "slow_arrival":
            out.append({"request": e.data["request"], "outcome": "arrival",
                        "selected_index": e.data["selected_index"], "selected_label": e.data["selected_label"],
                        "reasoning": e.data["reasoning"]})
        elif e.kind == "fallback":
            out.append({"request": e.data["request"], "outcome": "fallback", "reason": e.data["reason"],
                        "selected_index": e.data.get("selected_index")})
    return out
