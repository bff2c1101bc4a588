"""Navigation metrics (NE, SR, OS, SPL, nDTW, AT) and report files.

CSV columns, in order: ``scenario, seed, ne_m, success, oracle_success,
spl, ndtw, path_length_m, geodesic_m, steps``. The last row is the
aggregate with ``scenario = ALL``. Wall time is not part of these files
(it would break byte-identical reruns); it goes to ``timing.json``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .world import EpisodeSpec

CSV_COLUMNS = (
    "scenario", "seed", "ne_m", "success", "oracle_success", "spl", "ndtw",
    "path_length_m", "geodesic_m", "steps",
)


@dataclass(frozen=True)
class EpisodeRecord:
    scenario: str
    seed: int
    ne_m: float
    success: float
    oracle_success: float
    spl: float
    ndtw: float
    path_length_m: float
    geodesic_m: float
    steps: int
    wall_time_s: float = 0.0


@dataclass(frozen=True)
class MetricsReport:
    ne_m: float
    sr: float
    os: float
    spl: float
    ndtw: float
    at_s: float
    n_episodes: int

    def row(self) -> dict:
        return asdict(self)


def path_length(points: Sequence[tuple[float, float]] | np.ndarray) -> float:
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(p) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(p, axis=0).T)))


def dtw(a, b) -> float:
    """DTW cost with Euclidean point distance."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("DTW needs non-empty paths")
    return float(kernels.dtw(a, b))


def ndtw(path, reference, success_radius: float) -> float:
    ref = np.asarray(reference, dtype=np.float64).reshape(-1, 2)
    return math.exp(-dtw(path, ref) / (len(ref) * success_radius))


def geodesic_length(spec: EpisodeSpec) -> float:
    g = spec.grid
    s = g.cell_of(*spec.start.position)
    t = g.cell_of(*spec.goal)
    res = kernels.astar_grid(g.passable, s[0], s[1], t[0], t[1])
    if res is None:
        raise ValueError(f"{spec.name or 'scenario'}: goal unreachable from start")
    _, ns, nd = res
    return (ns + nd * kernels.SQRT2) * g.resolution


def reference_for(spec: EpisodeSpec) -> list[tuple[float, float]]:
    """Scenario's annotated reference path, else the ground-truth shortest path."""
    if spec.reference_path:
        return list(spec.reference_path)
    g = spec.grid
    s = g.cell_of(*spec.start.position)
    t = g.cell_of(*spec.goal)
    res = kernels.astar_grid(g.passable, s[0], s[1], t[0], t[1])
    if res is None:
        raise ValueError("goal unreachable from start")
    return [g.center(int(r), int(c)) for r, c in res[0]]


def episode_metrics(result, spec: EpisodeSpec, reference_path=None) -> EpisodeRecord:
    path = np.asarray(result.path, dtype=np.float64).reshape(-1, 2)
    if len(path) == 0:
        raise ValueError("empty agent path")
    ref = reference_for(spec) if reference_path is None else list(reference_path)
    if not ref:
        raise ValueError("empty reference path")
    gx, gy = spec.goal
    fx, fy = result.final_pose.x, result.final_pose.y
    ne = math.hypot(fx - gx, fy - gy)
    success = 1.0 if result.success else 0.0
    dmin = float(np.min(np.hypot(path[:, 0] - gx, path[:, 1] - gy)))
    oracle = 1.0 if dmin <= spec.success_radius else 0.0
    ell = geodesic_length(spec)
    p = path_length(path)
    denom = max(p, ell)
    spl = success * ell / denom if denom > 0 else success
    return EpisodeRecord(
        scenario=result.scenario or spec.name,
        seed=int(result.seed),
        ne_m=ne,
        success=success,
        oracle_success=oracle,
        spl=spl,
        ndtw=ndtw(path, ref, spec.success_radius),
        path_length_m=p,
        geodesic_m=ell,
        steps=int(result.step_count),
        wall_time_s=float(result.wall_time),
    )


def aggregate(records: Sequence[EpisodeRecord]) -> MetricsReport:
    if not records:
        raise ValueError("aggregate needs at least one record")
    n = len(records)

    def mean(attr: str) -> float:
        return math.fsum(getattr(r, attr) for r in records) / n

    return MetricsReport(
        ne_m=mean("ne_m"),
        sr=mean("success"),
        os=mean("oracle_success"),
        spl=mean("spl"),
        ndtw=mean("ndtw"),
        at_s=mean("wall_time_s"),
        n_episodes=n,
    )


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_csv(records: Sequence[EpisodeRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    rep = aggregate(records)
    w.writerow([
        "ALL", "", _fmt(rep.ne_m), _fmt(rep.sr), _fmt(rep.os), _fmt(rep.spl), _fmt(rep.ndtw),
        _fmt(math.fsum(r.path_length_m for r in records) / len(records)),
        _fmt(math.fsum(r.geodesic_m for r in records) / len(records)),
        _fmt(math.fsum(r.steps for r in records) / len(records)),
    ])
    return buf.getvalue()


def metrics_json(records: Sequence[EpisodeRecord]) -> str:
    rep = aggregate(records)
    body = {
        "columns": list(CSV_COLUMNS),
        "episodes": [{c: getattr(r, c) for c in CSV_COLUMNS} for r in records],
        "aggregate": {k: v for k, v in rep.row().items() if k != "at_s"},
    }
    return json.dumps(body, indent=1, sort_keys=True) + "\n"


def timing_json(records: Sequence[EpisodeRecord]) -> str:
    rep = aggregate(records)
    body = {
        "at_s": rep.at_s,
        "episodes": [{"scenario": r.scenario, "seed": r.seed, "wall_time_s": r.wall_time_s} for r in records],
    }
    return json.dumps(body, indent=1, sort_keys=True) + "\n"


def write_reports(records: Sequence[EpisodeRecord], out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(records), encoding="utf-8")
    (out / "metrics.json").write_text(metrics_json(records), encoding="utf-8")
    (out / "timing.json").write_text(timing_json(records), encoding="utf-8")
