import json
import re
from pathlib import Path

import numpy as np
import pytest
from conftest import make_spec, walled

from dualnav.mapping import Frontier, OccupancyMap
from dualnav.planner import astar
from dualnav.policy import (
    Candidate,
    InvalidSelection,
    MalformedReply,
    NoCandidates,
    OracleSlowPlanner,
    PlannerTimeout,
    RemoteSlowPlanner,
    ScriptedFastPolicy,
    TransportError,
    label_for,
    nearest_frontier,
)
from dualnav.policy.fixtures import ModelServer, ServerAction
from dualnav.policy.remote import (
    STAGE1_PROMPT,
    STAGE2_PROMPT,
    build_stage1_request,
    encode_request,
    parse_endpoint,
    parse_reply_object,
    parse_stage1_reply,
    parse_stage2_reply,
)
from dualnav.scheduler import ScheduleConfig, build_candidates, run_episode
from dualnav.world import Action

REFERENCE_DOC = Path(__file__).resolve().parent.parent / "paper.md"


def _candidate(belief, start, cell, index):
    target = belief.center(*cell)
    f = Frontier(cells=(cell,), representative=target, rep_cell=cell)
    return Candidate(label_for(index), f, target, astar(belief, start, target))


# -- oracle slow planner -----------------------------------------------------

@pytest.fixture
def t_maze():
    # corridor along row 5; a stub at column 12 leads north to the goal room,
    # columns 3..10 on row 5 are the agent's side
    inner = ["#" * 18 for _ in range(11)]
    rows = [list(r) for r in inner]
    for c in range(1, 17):
        rows[5][c] = "."
    for r in range(1, 5):
        rows[r][12] = "."
    for r in range(6, 10):
        rows[r][4] = "."
    g = walled(13, 20, ["".join(r) for r in rows])
    return make_spec(g, (6, 4), (2, 13))


def test_single_candidate_closer_to_goal_is_chosen(t_maze):
    b = OccupancyMap.from_truth(t_maze.grid)
    planner = OracleSlowPlanner()
    planner.reset(t_maze)
    c = _candidate(b, t_maze.start.position, (6, 10), 0)
    assert planner.plan(b, [c]).selected_index == 0


def test_goal_side_candidate_beats_nearer_wrong_branch(t_maze):
    b = OccupancyMap.from_truth(t_maze.grid)
    planner = OracleSlowPlanner()
    planner.reset(t_maze)
    start = t_maze.grid.center(6, 8)
    wrong = _candidate(b, start, (9, 5), 0)  # down the southern stub, nearer by path
    right = _candidate(b, start, (3, 13), 1)  # up the stub toward the goal
    assert wrong.path.cost < right.path.cost
    assert planner.plan(b, [wrong, right]).selected_index == 1
    assert nearest_frontier([wrong, right]).selected_index == 0


def test_equidistant_candidates_pick_lowest_index(t_maze):
    b = OccupancyMap.from_truth(t_maze.grid)
    planner = OracleSlowPlanner()
    planner.reset(t_maze)
    start = t_maze.grid.center(6, 4)
    c = _candidate(b, start, (6, 10), 0)
    twin = Candidate("F2", c.frontier, c.target, c.path)
    assert planner.plan(b, [c, twin]).selected_index == 0


def test_no_progress_raises_no_candidates(t_maze):
    b = OccupancyMap.from_truth(t_maze.grid)
    planner = OracleSlowPlanner()
    planner.reset(t_maze)
    start = t_maze.grid.center(6, 13)
    back = _candidate(b, start, (6, 4), 0)
    with pytest.raises(NoCandidates):
        planner.plan(b, [back])
    with pytest.raises(NoCandidates):
        planner.plan(b, [])


# -- scripted fast policy ----------------------------------------------------

def test_perfect_policy_always_succeeds_on_open_map():
    g = walled(20, 40)
    for i, (s, t) in enumerate([((2, 2), (17, 37)), ((10, 30), (3, 3)), ((15, 5), (15, 35))]):
        spec = make_spec(g, s, t, heading=90 * i)
        res = run_episode(spec, ScriptedFastPolicy(p_err=0.0), None, seed=i)
        assert res.success


@pytest.fixture
def one_junction():
    # west-east corridor with a single dead-end branch going south at column 10
    rows = ["#" * 28 for _ in range(9)]
    rows = [list(r) for r in rows]
    for c in range(1, 27):
        rows[2][c] = "."
    for r in range(3, 9):
        rows[r][10] = "."
    g = walled(11, 30, ["".join(r) for r in rows])
    return make_spec(g, (3, 2), (3, 27))


def test_always_wrong_policy_takes_the_branch_first(one_junction):
    for seed in range(5):
        pol = ScriptedFastPolicy(p_err=1.0, stop_at_dead_end=False)
        res = run_episode(one_junction, pol, None, seed=seed)
        assert pol.decisions and pol.decisions[0].wrong
        assert pol.decisions[0].cell == (3, 11)
        assert pol.decisions[0].chosen == (4, 11)
        # every later visit errs too, so the goal is never reached
        assert all(d.wrong for d in pol.decisions) and not res.success


def test_dead_end_stop_ends_the_episode_early(one_junction):
    pol = ScriptedFastPolicy(p_err=1.0, stop_at_dead_end=True)
    res = run_episode(one_junction, pol, None, seed=0)
    assert not res.success
    assert res.trace[-1].kind == "stop"
    r, c = one_junction.grid.cell_of(res.final_pose.x, res.final_pose.y)
    assert c == 11 and r > 6


def test_chunks_are_bounded_and_deterministic(one_junction):
    a = run_episode(one_junction, ScriptedFastPolicy(p_err=0.5, max_chunk=3), None, seed=4)
    b = run_episode(one_junction, ScriptedFastPolicy(p_err=0.5, max_chunk=3), None, seed=4)
    assert a.trace == b.trace


def test_fast_policy_validates_arguments():
    with pytest.raises(ValueError):
        ScriptedFastPolicy(p_err=1.5)
    with pytest.raises(ValueError):
        ScriptedFastPolicy(max_chunk=0)
    pol = ScriptedFastPolicy()
    pol.reset(make_spec(walled(5, 5), (1, 1), (3, 3)), 0)
    with pytest.raises(ValueError):
        pol.decide([])


def test_stop_when_goal_in_radius():
    spec = make_spec(walled(6, 6), (2, 2), (3, 3))
    pol = ScriptedFastPolicy(p_err=0.0)
    res = run_episode(spec, pol, None, seed=0)
    assert res.success and res.step_count == 1
    assert res.trace[0].kind == "stop" and res.trace[0].data["action"] == Action.Stop.value


# -- remote planner: parsing -------------------------------------------------

def _doc_box(title: str) -> str:
    text = REFERENCE_DOC.read_text(encoding="utf-8")
    start = text.index(f"title=\\large{{\\scriptsize {title}}}")
    body = text[text.index("]", text.index("fontupper", start)) + 1: text.index("\\end{tcolorbox}", start)]
    return body


def _latex_lines(body: str) -> list[str]:
    out = []
    for line in body.splitlines():
        line = line.strip().removesuffix("\\\\").strip()
        if not line or line.startswith("\\begin{itemize}") or line.startswith("\\end{itemize}"):
            continue
        line = re.sub(r"\\textbf\{([^}]*)\}", r"\1", line)
        if line.startswith("\\item "):
            line = "- " + line[len("\\item "):]
        out.append(line)
    return out


def _doc_prompt_and_reply(title: str) -> tuple[list[str], str]:
    lines = _latex_lines(_doc_box(title))
    cut = lines.index("{[}")
    reply = "[" + " ".join(lines[cut + 1: lines.index("{]}")]) + "]"
    return lines[:cut], reply.replace("``", '"').replace("''", '"')


needs_doc = pytest.mark.skipif(not REFERENCE_DOC.exists(), reason="reference document not in this checkout")


@needs_doc
@pytest.mark.parametrize("title, prompt", [
    ("MLLM Reasoning Stage1 Prompts", STAGE1_PROMPT),
    ("MLLM Reasoning Stage2 Prompts", STAGE2_PROMPT),
])
def test_prompt_templates_are_verbatim(title, prompt):
    lines, _ = _doc_prompt_and_reply(title)
    assert [ln for ln in prompt.splitlines() if ln] == lines


@needs_doc
def test_appendix_stage1_reply_parses():
    _, reply = _doc_prompt_and_reply("MLLM Reasoning Stage1 Prompts")
    want = dict(re.findall(r'"([^"]+)": "([^"]+)"', reply))
    s = parse_stage1_reply(reply)
    assert s.location == want["Location"]
    assert s.location.startswith("The agent is navigating an indoor environment")
    assert s.relationship == want["Relationship"]
    assert s.possible_directions == want["Possible directions"]


@needs_doc
def test_appendix_stage2_reply_selects_f3():
    _, reply = _doc_prompt_and_reply("MLLM Reasoning Stage2 Prompts")
    choice = parse_stage2_reply(reply, 4)
    assert choice.selected_index == 2 and choice.selected_label == "F3"
    assert choice.reasoning.startswith("F3 ")


def test_f9_of_three_is_invalid():
    with pytest.raises(InvalidSelection) as err:
        parse_stage2_reply('{"Selected waypoint": "F9", "Reasoning": "x"}', 3)
    assert err.value.label == "F9"
    with pytest.raises(InvalidSelection):
        parse_stage2_reply('{"Selected waypoint": "left", "Reasoning": "x"}', 3)


def test_missing_relationship_names_the_field():
    with pytest.raises(MalformedReply) as err:
        parse_stage1_reply('{"Location": "a", "Possible directions": "b"}')
    assert err.value.field == "Relationship"
    assert "Relationship" in str(err.value)


@pytest.mark.parametrize("text", ["not json", "[1, 2]", '"just a string"', '{"Location": 3}', "[]"])
def test_malformed_replies(text):
    with pytest.raises(MalformedReply):
        parse_stage1_reply(text)


def test_reply_object_forms():
    obj = {"Selected waypoint": "F2", "Reasoning": "open"}
    assert parse_reply_object(json.dumps(obj)) == obj
    assert parse_reply_object(json.dumps([obj])) == obj
    assert parse_reply_object('[ "Selected waypoint": "F2", "Reasoning": "open" ]') == obj


def test_requests_are_canonical_json_lines():
    req = build_stage1_request("AAAA", "go")
    wire = encode_request(req)
    assert wire.endswith(b"\n") and wire.count(b"\n") == 1
    assert wire == (json.dumps(req, sort_keys=True, separators=(",", ":")) + "\n").encode()
    assert req["prompt"] == STAGE1_PROMPT and req["candidates"] == []


def test_endpoint_parsing():
    assert parse_endpoint("localhost:9000") == ("localhost", 9000)
    assert parse_endpoint(":9000") == ("127.0.0.1", 9000)
    with pytest.raises(ValueError):
        parse_endpoint("localhost")


# -- remote planner: over the socket ------------------------------------------

@pytest.fixture
def scene():
    spec = make_spec(walled(12, 16, ["." * 14] * 3 + ["######.#######"] + ["." * 14] * 6), (2, 2), (9, 12))
    b = OccupancyMap.from_truth(spec.grid).cells.copy()
    b[5:, :] = 0  # south half unseen
    b[4, 7] = 1
    belief = OccupancyMap(b, 0.25)
    cands = build_candidates(belief, spec.start, ScheduleConfig())
    return spec, belief, cands


SUMMARY = '{"Location": "hall", "Relationship": "door south", "Possible directions": "south"}'


def test_stage1_round_trip_through_endpoint(scene):
    spec, belief, cands = scene
    with ModelServer(lambda req: SUMMARY) as srv:
        s = RemoteSlowPlanner(srv.endpoint, timeout=5).stage1("AAAA", "go south")
    assert (s.location, s.relationship, s.possible_directions) == ("hall", "door south", "south")
    assert srv.exchanges[0]["stage"] == 1


def test_scripted_oracle_answer_matches_oracle(scene):
    spec, belief, cands = scene
    oracle = OracleSlowPlanner()
    oracle.reset(spec)
    want = oracle.plan(belief, cands)

    def responder(req):
        if req["stage"] == 1:
            return SUMMARY
        assert [c["label"] for c in req["candidates"]] == [c.label for c in cands]
        return json.dumps({"Selected waypoint": want.selected_label, "Reasoning": "oracle"})

    with ModelServer(responder) as srv:
        got = RemoteSlowPlanner(srv.endpoint, timeout=5).plan(belief, cands, spec.instruction)
    assert got.selected_index == want.selected_index
    assert len(srv.exchanges) == 2


def test_closed_connection_is_transport_error(scene):
    _, belief, cands = scene
    with ModelServer(lambda req: ServerAction(action="close")) as srv:
        with pytest.raises(TransportError):
            RemoteSlowPlanner(srv.endpoint, timeout=5).plan(belief, cands)


def test_slow_endpoint_times_out(scene):
    _, belief, cands = scene
    with ModelServer(lambda req: ServerAction(reply=SUMMARY, delay_s=0.6)) as srv:
        with pytest.raises(PlannerTimeout):
            RemoteSlowPlanner(srv.endpoint, timeout=0.2).plan(belief, cands)


def test_unreachable_endpoint_is_transport_error():
    with ModelServer(lambda req: SUMMARY) as srv:
        endpoint = srv.endpoint
    with pytest.raises(TransportError):
        RemoteSlowPlanner(endpoint, timeout=1).stage1("AAAA", "x")


def test_credential_comes_from_environment(monkeypatch, scene):
    seen = []
    monkeypatch.setenv("DUALNAV_ENDPOINT_TOKEN", "s3cret")
    with ModelServer(lambda req: seen.append(req) or SUMMARY) as srv:
        RemoteSlowPlanner(srv.endpoint, timeout=5).stage1("AAAA", "x")
    assert seen[0]["auth"] == "s3cret"
    # the recorded digest ignores the credential
    assert "s3cret" not in json.dumps(srv.exchanges)


def test_candidate_views_are_sent_as_images(scene):
    _, belief, cands = scene
    reqs = []

    def responder(req):
        reqs.append(req)
        return SUMMARY if req["stage"] == 1 else '{"Selected waypoint": "F1", "Reasoning": "r"}'

    with ModelServer(responder) as srv:
        RemoteSlowPlanner(srv.endpoint, timeout=5).plan(belief, cands)
    stage2 = reqs[1]
    assert stage2["summary"] == json.loads(SUMMARY)
    assert [len(c["views"]) for c in stage2["candidates"]] == [len(c.kept) for c in cands]
    assert np.all([v.startswith("UDYK") for c in stage2["candidates"] for v in c["views"]])  # b64 of "P6\n"
