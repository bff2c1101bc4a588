"""Replay recorded remote-planner sessions against the real client."""
import json

import pytest
from conftest import FIXTURES

from dualnav.policy.fixtures import MockModel, load_fixture
from dualnav.scenario_gen import GenSpec, generate
from dualnav.sessions import SessionSettings, record_session, replay_session
from dualnav.world import dump_scenario, load_scenario


def test_scenario_fixture_is_reproducible():
    assert dump_scenario(load_scenario(FIXTURES / "remote_scenario.json")) == dump_scenario(generate(GenSpec(seed=3)).spec)


@pytest.fixture(scope="module")
def normal():
    return replay_session(FIXTURES / "session_normal.jsonl"), load_fixture(FIXTURES / "session_normal.jsonl")


@pytest.fixture(scope="module")
def faults():
    return replay_session(FIXTURES / "session_faults.jsonl"), load_fixture(FIXTURES / "session_faults.jsonl")


def test_normal_session_replays_exactly(normal):
    run, fx = normal
    assert run.mismatches == []
    assert run.outcomes == fx.choices
    assert len(run.exchanges) == len(fx.exchanges)
    assert all(o["outcome"] == "arrival" or o["reason"] == "terminated" for o in run.outcomes)
    assert run.result.success


def test_fault_session_replays_exactly(faults):
    run, fx = faults
    assert run.mismatches == []
    assert run.outcomes == fx.choices
    reasons = [o["reason"] for o in run.outcomes[:5]]
    assert reasons == ["MalformedReply", "InvalidSelection", "MalformedReply", "TransportError", "PlannerTimeout"]
    assert all(o["outcome"] == "fallback" for o in run.outcomes[:5])
    assert run.outcomes[5]["outcome"] == "arrival"


def test_fallback_events_name_the_failure(faults):
    run, _ = faults
    fb = [e for e in run.result.events("fallback") if e.data["reason"] != "terminated"]
    assert len(fb) == 5
    assert "Relationship" in fb[0].data["detail"]
    assert "F9" in fb[1].data["detail"]


def test_divergent_run_is_reported(tmp_path):
    # same recording, different fast-policy seed: requests stop matching
    src = (FIXTURES / "session_normal.jsonl").read_text().splitlines()
    meta = json.loads(src[0])
    meta["seed"] = 5
    (tmp_path / "remote_scenario.json").write_bytes((FIXTURES / "remote_scenario.json").read_bytes())
    p = tmp_path / "s.jsonl"
    p.write_text("\n".join([json.dumps(meta, sort_keys=True), *src[1:]]) + "\n")
    run = replay_session(p)
    assert run.mismatches
    assert any(o.get("reason") == "MalformedReply" for o in run.outcomes)


def test_record_then_replay(tmp_path):
    (tmp_path / "sc.json").write_text(dump_scenario(generate(GenSpec(seed=8)).spec))
    st = SessionSettings(scenario="sc.json", seed=2, ratio_k=10, latency_l=4, timeout_s=30.0)
    rec = record_session(tmp_path / "f.jsonl", MockModel(), st)
    rep = replay_session(tmp_path / "f.jsonl")
    assert rep.mismatches == [] and rep.outcomes == rec.outcomes
    assert [e.kind for e in rep.result.trace] == [e.kind for e in rec.result.trace]
    assert rep.result.path == rec.result.path
