"""SVG drawings of episodes, built from trajectory logs only."""
from __future__ import annotations

from html import escape
from pathlib import Path

from .imaging import map_image, write_ppm
from .mapping import OccupancyMap, detect_frontiers
from .trajlog import TrajectoryLog, read_log

CELL_PX = 12
_FILL = {"#": "#1e1e1e", ".": "#ffffff"}
_BELIEF_UNKNOWN = "#9a9a9a"


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    def __init__(self, res: float, px: int):
        self.res = res
        self.px = px

    def xy(self, x: float, y: float) -> tuple[str, str]:
        return _f((x / self.res + 0.5) * self.px), _f((y / self.res + 0.5) * self.px)


def _belief(tlog: TrajectoryLog) -> OccupancyMap | None:
    rows = (tlog.result or {}).get("belief")
    if not rows:
        return None
    return OccupancyMap.from_rows(rows, float(tlog.header["resolution_m"]))


def svg_from_log(tlog: TrajectoryLog, cell_px: int = CELL_PX) -> str:
    h = tlog.header
    grid: list[str] = h["grid"]
    res = float(h["resolution_m"])
    fr = _Frame(res, cell_px)
    H, W = len(grid), len(grid[0])
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W * cell_px}" height="{H * cell_px}" '
        f'viewBox="0 0 {W * cell_px} {H * cell_px}">',
        f"<title>{escape(str(h.get('scenario', '')))} seed {h.get('seed', 0)} ({escape(str(h.get('mode', '')))})</title>",
        '<g class="map">',
    ]
    belief = _belief(tlog)
    for r, row in enumerate(grid):
        for c, ch in enumerate(row):
            fill = _FILL[ch]
            if belief is not None and belief.cells[r, c] == 0:
                fill = _BELIEF_UNKNOWN if ch == "." else "#5a5a5a"
            out.append(f'<rect x="{c * cell_px}" y="{r * cell_px}" width="{cell_px}" height="{cell_px}" fill="{fill}"/>')
    out.append("</g>")
    if belief is not None:
        min_cluster = int(h.get("config", {}).get("frontier_min_cluster", 1))
        out.append('<g class="frontiers" fill="#286ef0">')
        for f in detect_frontiers(belief, min_cluster):
            for r, c in f.cells:
                out.append(f'<rect x="{c * cell_px}" y="{r * cell_px}" width="{cell_px}" height="{cell_px}" opacity="0.6"/>')
        out.append("</g>")
    out.append('<g class="planned" fill="none" stroke="#2ca02c" stroke-width="2" stroke-dasharray="4 3">')
    for path in tlog.planned_paths():
        if len(path) >= 2:
            pts = " ".join(",".join(fr.xy(x, y)) for x, y in path)
            out.append(f'<polyline points="{pts}"/>')
    out.append("</g>")
    gx, gy = fr.xy(h["goal"]["x"], h["goal"]["y"])
    radius_px = _f(float(h["success_radius_m"]) / res * cell_px)
    out.append(f'<circle class="goal-disc" cx="{gx}" cy="{gy}" r="{radius_px}" fill="#f0a020" fill-opacity="0.2" '
               f'stroke="#f0a020"/>')
    out.append(f'<circle class="goal" cx="{gx}" cy="{gy}" r="{_f(cell_px / 3)}" fill="#f0a020"/>')
    pts = tlog.positions()
    d = "M" + " L".join(f"{x} {y}" for x, y in (fr.xy(*p) for p in pts))
    out.append(f'<path class="trajectory" d="{d}" fill="none" stroke="#e63c28" stroke-width="2"/>')
    sx, sy = fr.xy(*pts[0])
    out.append(f'<circle class="start" cx="{sx}" cy="{sy}" r="{_f(cell_px / 3)}" fill="#e63c28"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_log(log_path: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Write ``<stem>.svg`` (and ``<stem>.ppm`` of the final belief when present)."""
    log_path = Path(log_path)
    tlog = read_log(log_path)
    out = Path(out_dir) if out_dir is not None else log_path.parent
    out.mkdir(parents=True, exist_ok=True)
    svg = out / (log_path.stem + ".svg")
    svg.write_text(svg_from_log(tlog), encoding="utf-8")
    written = [svg]
    belief = _belief(tlog)
    if belief is not None:
        ppm = out / (log_path.stem + ".ppm")
        min_cluster = int(tlog.header.get("config", {}).get("frontier_min_cluster", 1))
        write_ppm(ppm, map_image(belief.cells, detect_frontiers(belief, min_cluster), scale=4))
        written.append(ppm)
    return written

