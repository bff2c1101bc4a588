"""Regenerate the remote-planner session fixtures under tests/fixtures.

    python3 tools/record_fixtures.py

Writes the scenario, a clean session answered by the mock model, and a
session in which particular requests get broken replies.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

from dualnav.policy.fixtures import MockModel, ServerAction
from dualnav.scenario_gen import GenSpec, generate
from dualnav.sessions import SessionSettings, record_session
from dualnav.world import save_scenario

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
SCENARIO = "remote_scenario.json"
TIMEOUT_S = 1.0

# slow-request number -> (stage it hits, fault)
FAULTS = {
    0: (1, "missing_relationship"),
    1: (2, "label_out_of_range"),
    2: (2, "not_json"),
    3: (1, "close"),
    4: (2, "slow"),
}


class FaultyModel:
    """Mock model that breaks the replies listed in FAULTS."""

    def __init__(self):
        self.inner = MockModel()
        self.request_no = -1

    def __call__(self, req: dict):
        stage = req.get("stage")
        if stage == 1:
            self.request_no += 1
        fault = FAULTS.get(self.request_no)
        if fault is None or fault[0] != stage:
            return self.inner(req)
        kind = fault[1]
        if kind == "missing_relationship":
            body = json.loads(self.inner(req))
            del body["Relationship"]
            return json.dumps(body, sort_keys=True)
        if kind == "label_out_of_range":
            return json.dumps({"Selected waypoint": "F9", "Reasoning": "F9 looks open."}, sort_keys=True)
        if kind == "not_json":
            return "I think the second corridor is best"
        if kind == "close":
            return ServerAction(action="close")
        if kind == "slow":
            return ServerAction(reply=self.inner(req), delay_s=TIMEOUT_S + 0.5)
        raise ValueError(kind)


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    spec = generate(GenSpec(seed=3)).spec
    save_scenario(spec, FIXTURES / SCENARIO)

    normal = SessionSettings(scenario=SCENARIO, seed=0, p_err=0.25, ratio_k=20, latency_l=8, timeout_s=30.0)
    run = record_session(FIXTURES / "session_normal.jsonl", MockModel(), normal)
    print(f"session_normal: {len(run.exchanges)} exchanges, {len(run.outcomes)} slow requests, "
          f"success={run.result.success}")

    faulty = SessionSettings(scenario=SCENARIO, seed=1, p_err=0.25, ratio_k=10, latency_l=8, timeout_s=TIMEOUT_S)
    run = record_session(FIXTURES / "session_faults.jsonl", FaultyModel(), faulty)
    print(f"session_faults: {len(run.exchanges)} exchanges, outcomes:")
    for o in run.outcomes:
        print("   ", o)
    needed = max(FAULTS) + 1
    if len(run.outcomes) < needed:
        print(f"only {len(run.outcomes)} slow requests; faults need {needed}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
