"""Command line: run, sweep, render, generate.

Settings resolve as command-line flag, then ``--config`` JSON file, then
built-in default. The effective settings are printed to stderr at start.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from .metrics import aggregate, episode_metrics, write_reports
from .policy import OracleSlowPlanner, RemoteSlowPlanner, ScriptedFastPolicy, StubLatencyPlanner
from .render import render_log
from .scenario_gen import GenSpec, generate_suite
from .scheduler import EpisodeResult, ScheduleConfig, run_suite, scenario_paths
from .trajlog import LogFormatError, write_log
from .world import ScenarioError, load_scenario

log = logging.getLogger("dualnav")

POLICIES = ("scripted", "oracle", "remote")
MODES = ("dual", "fast", "slow")

DEFAULTS = {
    "scenario": None,
    "policy": "oracle",
    "mode": None,
    "ratio": 20,
    "ratios": "10,20,30",
    "latency": 8,
    "p_err": 0.25,
    "tau": 0.92,
    "d": 0.5,
    "seed": [0],
    "endpoint": None,
    "timeout": 60.0,
    "stub_delay": 0.01,
    "waypoint_follow": "strict",
    "out": "runs/out",
}


class ConfigError(ValueError):
    pass


def _seeds(values) -> list[int]:
    out: list[int] = []
    for v in values if isinstance(values, list) else [values]:
        for part in str(v).split(","):
            part = part.strip()
            if not part:
                continue
            m = re.fullmatch(r"(-?\d+)-(-?\d+)", part)
            if m:
                out.extend(range(int(m.group(1)), int(m.group(2)) + 1))
            else:
                out.append(int(part))
    if not out:
        raise ConfigError("at least one seed is required")
    return out


def resolve(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        unknown = sorted(set(file_cfg) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"{args.config}: unknown keys {unknown}")
        cfg.update(file_cfg)
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg["seed"] = _seeds(cfg["seed"])
    if cfg["policy"] not in POLICIES:
        raise ConfigError(f"policy must be one of {POLICIES}")
    if cfg["mode"] is None:
        cfg["mode"] = "fast" if cfg["policy"] == "scripted" else "dual"
    if cfg["mode"] not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    if cfg["policy"] == "scripted" and cfg["mode"] != "fast":
        raise ConfigError("policy 'scripted' has no slow planner; use mode 'fast'")
    if (cfg["policy"] == "remote") != bool(cfg["endpoint"]):
        raise ConfigError("--endpoint is required with --policy remote and only then")
    if not 0.0 <= float(cfg["p_err"]) <= 1.0:
        raise ConfigError("p_err must lie in [0, 1]")
    if int(cfg["ratio"]) < 1 or int(cfg["latency"]) < 0 or int(cfg["latency"]) >= int(cfg["ratio"]):
        raise ConfigError("need ratio >= 1 and 0 <= latency < ratio")
    if not -1.0 < float(cfg["tau"]) <= 1.0:
        raise ConfigError("tau must lie in (-1, 1]")
    if not float(cfg["d"]) > 0:
        raise ConfigError("d must be positive")
    return cfg


def schedule_config(cfg: dict, ratio: int | None = None) -> ScheduleConfig:
    return ScheduleConfig(
        ratio_k=int(ratio if ratio is not None else cfg["ratio"]),
        latency_l=int(cfg["latency"]),
        waypoint_follow=cfg["waypoint_follow"],
        d=float(cfg["d"]),
        tau=float(cfg["tau"]),
    )


def factories(cfg: dict, mode: str, stub: bool = False):
    p_err = float(cfg["p_err"])
    fast = (lambda: ScriptedFastPolicy(p_err=p_err)) if mode in ("dual", "fast") else None
    if mode == "fast":
        return fast, None
    if cfg["policy"] == "remote":
        endpoint, timeout = cfg["endpoint"], float(cfg["timeout"])
        return fast, (lambda: RemoteSlowPlanner(endpoint, timeout))
    if stub:
        delay = float(cfg["stub_delay"])
        return fast, (lambda: StubLatencyPlanner(OracleSlowPlanner(), delay))
    return fast, OracleSlowPlanner


def _load_specs(scenario: str | None):
    if not scenario:
        raise ConfigError("--scenario is required")
    paths = scenario_paths(scenario)
    if not paths:
        raise ConfigError(f"no scenario files under {scenario}")
    return [load_scenario(p) for p in paths]


def _provenance(cfg: dict) -> None:
    print("dualnav settings: " + json.dumps(cfg, sort_keys=True), file=sys.stderr)


def _episode_stem(r: EpisodeResult) -> str:
    return f"{r.scenario}_s{r.seed}"


def cmd_run(cfg: dict) -> int:
    specs = _load_specs(cfg["scenario"])
    sched = schedule_config(cfg)
    fast, slow = factories(cfg, cfg["mode"])
    results = run_suite(specs, fast, slow, sched, cfg["seed"])
    out = Path(cfg["out"])
    (out / "logs").mkdir(parents=True, exist_ok=True)
    (out / "svg").mkdir(parents=True, exist_ok=True)
    by_name = {s.name: s for s in specs}
    log_cfg = {**sched.to_dict(), "policy": cfg["policy"], "mode": cfg["mode"], "p_err": float(cfg["p_err"])}
    records, failed = [], 0
    for r in results:
        if r.error:
            failed += 1
            print(f"episode {r.scenario} seed {r.seed} aborted: {r.error}", file=sys.stderr)
            continue
        spec = by_name[r.scenario]
        path = out / "logs" / (_episode_stem(r) + ".jsonl")
        write_log(path, r, spec, log_cfg)
        render_log(path, out / "svg")
        records.append(episode_metrics(r, spec))
    if records:
        write_reports(records, out)
        rep = aggregate(records)
        print(f"episodes={rep.n_episodes} SR={rep.sr:.3f} OS={rep.os:.3f} SPL={rep.spl:.3f} "
              f"nDTW={rep.ndtw:.3f} NE={rep.ne_m:.2f} AT={rep.at_s:.3f}s")
    (out / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return 0 if failed == 0 and records else 1


SWEEP_COLUMNS = ("row", "method", "ratio", "ne_m", "os", "sr", "spl", "ndtw", "at_s", "n_episodes")


def sweep_rows(specs, cfg: dict, ratios: list[int]) -> list[dict]:
    rows = []
    plan = [("System1", "fast", None), ("System2", "slow", None)]
    plan += [("System1+2", "dual", k) for k in ratios]
    for i, (method, mode, k) in enumerate(plan):
        fast, slow = factories(cfg, mode, stub=cfg["policy"] != "remote")
        sched = schedule_config(cfg, k if k is not None else max(ratios))
        results = run_suite(specs, fast, slow, sched, cfg["seed"])
        bad = [r for r in results if r.error]
        if bad:
            raise RuntimeError(f"{len(bad)} episode(s) aborted in row {chr(97 + i)}: {bad[0].error}")
        by_name = {s.name: s for s in specs}
        rep = aggregate([episode_metrics(r, by_name[r.scenario]) for r in results])
        rows.append({"row": chr(97 + i), "method": method, "ratio": f"{k}:1" if k else "-", **{
            c: getattr(rep, c) for c in ("ne_m", "os", "sr", "spl", "ndtw", "at_s", "n_episodes")}})
    return rows


def format_table(rows: list[dict]) -> str:
    head = "| row | method | S1:S2 | NE | OS | SR | SPL | nDTW | AT (s) |"
    sep = "|---|---|---|---|---|---|---|---|---|"
    lines = [head, sep]
    for r in rows:
        lines.append(
            f"| ({r['row']}) | {r['method']} | {r['ratio']} | {r['ne_m']:.2f} | {100 * r['os']:.1f} | "
            f"{100 * r['sr']:.1f} | {100 * r['spl']:.1f} | {100 * r['ndtw']:.1f} | {r['at_s']:.3f} |"
        )
    return "\n".join(lines) + "\n"


def cmd_sweep(cfg: dict) -> int:
    ratios = [int(x) for x in str(cfg["ratios"]).split(",") if x.strip()]
    if len(ratios) < 2:
        raise ConfigError("sweep needs at least two ratios")
    if any(k <= int(cfg["latency"]) for k in ratios):
        raise ConfigError("every ratio must exceed the latency")
    specs = _load_specs(cfg["scenario"])
    rows = sweep_rows(specs, cfg, ratios)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", encoding="utf-8") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join(str(r[c]) for c in SWEEP_COLUMNS) + "\n")
    table = format_table(rows)
    (out / "sweep.md").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def cmd_render(paths: list[str], out: str | None) -> int:
    status = 0
    for p in paths:
        try:
            for f in render_log(p, out):
                print(f)
        except (OSError, LogFormatError) as exc:
            print(f"render failed: {exc}", file=sys.stderr)
            status = 1
    return status


def cmd_generate(args: argparse.Namespace) -> int:
    base = GenSpec(
        seed=args.seed,
        size=args.size,
        room_count=args.rooms,
        corridor_width=args.corridor_width,
        junction_target=args.junctions,
        min_geodesic=args.min_geodesic,
    )
    suite = generate_suite(args.count, base, args.out)
    geo = [g.geodesic_m for g in suite]
    print(f"wrote {len(suite)} scenarios to {args.out} (geodesic {min(geo):.2f}-{max(geo):.2f} m)")
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with any of the settings below")
    p.add_argument("--scenario", help="scenario file or directory of *.json")
    p.add_argument("--policy", choices=POLICIES, help="scripted (fast only), oracle or remote slow planner")
    p.add_argument("--mode", choices=MODES, help="dual (default), fast only, or slow only")
    p.add_argument("--ratio", type=int, help="fast steps per slow request (default 20)")
    p.add_argument("--latency", type=int, help="fast steps before a slow plan arrives (default 8)")
    p.add_argument("--p-err", dest="p_err", type=float, help="junction error probability (default 0.25)")
    p.add_argument("--tau", type=float, help="view pruning threshold (default 0.92)")
    p.add_argument("--d", type=float, help="path interpolation spacing in metres (default 0.5)")
    p.add_argument("--seed", action="append", help="seed, list (0,1,2) or range (0-9); repeatable")
    p.add_argument("--endpoint", help="host:port of the model endpoint (remote only)")
    p.add_argument("--timeout", type=float, help="remote call timeout in seconds (default 60)")
    p.add_argument("--waypoint-follow", dest="waypoint_follow", choices=("strict", "replan_on_block"))
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualnav", description="Fast/slow grid navigation harness.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run episodes and write logs, metrics and SVGs")
    _common(run)
    sw = sub.add_parser("sweep", help="frequency-ratio comparison table")
    _common(sw)
    sw.add_argument("--ratios", help="comma-separated ratios (default 10,20,30)")
    sw.add_argument("--stub-delay", dest="stub_delay", type=float,
                    help="wall-clock delay per in-process slow call (default 0.01 s)")
    rd = sub.add_parser("render", help="redraw SVG/PPM from trajectory logs")
    rd.add_argument("logs", nargs="+")
    rd.add_argument("--out")
    gen = sub.add_parser("generate", help="write a generated maze suite")
    gen.add_argument("--out", required=True)
    gen.add_argument("--count", type=int, default=100)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--size", type=int, default=41)
    gen.add_argument("--rooms", type=int, default=0)
    gen.add_argument("--corridor-width", dest="corridor_width", type=int, default=1)
    gen.add_argument("--junctions", type=int, default=4)
    gen.add_argument("--min-geodesic", dest="min_geodesic", type=float, default=10.0)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "render":
            return cmd_render(args.logs, args.out)
        if args.command == "generate":
            return cmd_generate(args)
        cfg = resolve(args)
        _provenance(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_sweep(cfg)
    except (ConfigError, ScenarioError, ValueError, OSError) as exc:
        print(f"dualnav: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
