"""Trajectory logs: one JSON object per line, keys sorted, no timestamps.

Record types, in file order:

``header``
    ``version, scenario, seed, mode, grid (rows of '#'/'.'), resolution_m,
    start {x, y, heading}, goal {x, y}, success_radius_m, max_steps,
    instruction, config {...}``
``event``
    ``step, kind`` plus kind-specific fields. Every step-taking event
    (``fast_action``, ``waypoint_step``, ``stop``) carries ``action``,
    ``pose [x, y, heading]`` and ``collision``.
``result``
    ``success, step_count, final_pose [x, y, heading], belief`` (rows of
    '?', '.', '#').

A log holds everything needed to redraw the episode.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .scheduler import EpisodeResult
from .world import EpisodeSpec

log = logging.getLogger(__name__)

LOG_VERSION = 1
STEP_KINDS = ("fast_action", "waypoint_step", "stop")


class LogFormatError(ValueError):
    pass


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def log_lines(result: EpisodeResult, spec: EpisodeSpec, config: dict | None = None) -> list[str]:
    header = {
        "type": "header",
        "version": LOG_VERSION,
        "scenario": result.scenario or spec.name,
        "seed": result.seed,
        "mode": result.mode,
        "grid": spec.grid.to_rows(),
        "resolution_m": spec.grid.resolution,
        "start": {"x": spec.start.x, "y": spec.start.y, "heading": spec.start.heading},
        "goal": {"x": spec.goal[0], "y": spec.goal[1]},
        "success_radius_m": spec.success_radius,
        "max_steps": spec.max_steps,
        "instruction": spec.instruction,
        "config": config or {},
    }
    lines = [_dumps(header)]
    lines += [_dumps({"type": "event", **e.to_dict()}) for e in result.trace]
    fp = result.final_pose
    lines.append(_dumps({
        "type": "result",
        "success": result.success,
        "step_count": result.step_count,
        "final_pose": [fp.x, fp.y, fp.heading],
        "belief": result.belief.to_rows() if result.belief is not None else None,
    }))
    return lines


def write_log(path: str | Path, result: EpisodeResult, spec: EpisodeSpec, config: dict | None = None) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(log_lines(result, spec, config)) + "\n", encoding="utf-8")
    tmp.replace(path)


@dataclass
class TrajectoryLog:
    header: dict
    events: list[dict] = field(default_factory=list)
    result: dict | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def truncated(self) -> bool:
        return self.result is None

    def positions(self) -> list[tuple[float, float]]:
        """Start plus the pose after every step-taking event."""
        s = self.header["start"]
        pts = [(float(s["x"]), float(s["y"]))]
        for e in self.events:
            if e.get("kind") in STEP_KINDS:
                pts.append((float(e["pose"][0]), float(e["pose"][1])))
        return pts

    def planned_paths(self) -> list[list[tuple[float, float]]]:
        return [[(float(x), float(y)) for x, y in e.get("path", [])]
                for e in self.events if e.get("kind") == "waypoint_begin"]


def read_log(path: str | Path) -> TrajectoryLog:
    """Parse a log. A damaged final line is dropped with a warning; damage elsewhere raises."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        raise LogFormatError(f"{path}: empty log")
    lines = text.split("\n")
    complete_end = text.endswith("\n")
    if complete_end:
        lines = lines[:-1]
    out: TrajectoryLog | None = None
    for i, line in enumerate(lines, 1):
        last = i == len(lines)
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict) or "type" not in rec:
                raise ValueError("record is not an object with a 'type'")
        except ValueError as exc:
            if last and out is not None:
                msg = f"{path}: line {i}: truncated record ignored ({exc})"
                log.warning(msg)
                out.warnings.append(msg)
                break
            raise LogFormatError(f"{path}: line {i}: {exc}") from None
        kind = rec["type"]
        if i == 1:
            if kind != "header":
                raise LogFormatError(f"{path}: line 1: expected a header record")
            out = TrajectoryLog(header=rec)
            continue
        if kind == "event":
            if out.result is not None:
                raise LogFormatError(f"{path}: line {i}: event after result record")
            if rec.get("kind") in STEP_KINDS and "pose" not in rec:
                raise LogFormatError(f"{path}: line {i}: step event without pose")
            out.events.append(rec)
        elif kind == "result":
            out.result = rec
        else:
            raise LogFormatError(f"{path}: line {i}: unknown record type {kind!r}")
    if out is None:
        raise LogFormatError(f"{path}: empty log")
    if out.result is None:
        msg = f"{path}: no result record; log is truncated"
        log.warning(msg)
        out.warnings.append(msg)
    return out
