"""Record and replay complete remote-planner episodes.

A session fixture (see ``policy.fixtures``) starts with a ``meta`` record
naming the scenario file (relative to the fixture) and the settings, so a
replay needs nothing but the fixture path.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .policy.fast import ScriptedFastPolicy
from .policy.fixtures import ModelServer, ReplayServer, Responder
from .policy.remote import RemoteSlowPlanner
from .scheduler import EpisodeResult, ScheduleConfig, run_episode, slow_outcomes
from .world import load_scenario


@dataclass(frozen=True)
class SessionSettings:
    scenario: str
    seed: int = 0
    p_err: float = 0.25
    ratio_k: int = 20
    latency_l: int = 8
    timeout_s: float = 5.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SessionRun:
    result: EpisodeResult
    outcomes: list[dict]
    exchanges: list[dict]
    mismatches: list[int]


def _episode(scenario: Path, st: SessionSettings, endpoint: str) -> EpisodeResult:
    spec = load_scenario(scenario)
    cfg = ScheduleConfig(ratio_k=st.ratio_k, latency_l=st.latency_l)
    return run_episode(spec, ScriptedFastPolicy(p_err=st.p_err), RemoteSlowPlanner(endpoint, st.timeout_s), cfg, st.seed)


def record_session(fixture: str | Path, responder: Responder, settings: SessionSettings) -> SessionRun:
    fixture = Path(fixture)
    with ModelServer(responder) as server:
        result = _episode(fixture.parent / settings.scenario, settings, server.endpoint)
    outcomes = slow_outcomes(result.trace)
    server.save(fixture, choices=outcomes, meta=settings.to_dict())
    return SessionRun(result, outcomes, list(server.exchanges), [])


def replay_session(fixture: str | Path) -> SessionRun:
    fixture = Path(fixture)
    with ReplayServer(fixture) as server:
        if server.meta is None:
            raise ValueError(f"{fixture}: no meta record")
        st = SessionSettings(**server.meta)
        result = _episode(fixture.parent / st.scenario, st, server.endpoint)
    return SessionRun(result, slow_outcomes(result.trace), list(server.exchanges), list(server.mismatches))
