"""Two-stage remote planner over a line-oriented JSON socket protocol.

Wire format (one UTF-8 line per message, ``\\n`` terminated):

request, stage 1::

    {"stage": 1, "prompt": ..., "instruction": ..., "topdown_image": <b64 PPM>,
     "candidates": []}

request, stage 2::

    {"stage": 2, "prompt": ..., "instruction": ..., "topdown_image": <b64 PPM>,
     "summary": {"Location": ..., "Relationship": ..., "Possible directions": ...},
     "candidates": [{"label": "F1", "views": [<b64 PPM>, ...]}, ...]}

Requests are serialised with sorted keys and compact separators. The reply
line is the model's text: a JSON object, a one-element JSON list holding
the object, or the bracketed ``[ "key": "value", ... ]`` form.
"""
from __future__ import annotations

import hashlib
import json
import os
import socket
from typing import Sequence

from ..imaging import map_image, patch_image, ppm_b64
from ..mapping import OccupancyMap
from .base import (
    Candidate,
    EnvSummary,
    FrontierChoice,
    InvalidSelection,
    MalformedReply,
    PlannerTimeout,
    TransportError,
)

DEFAULT_TIMEOUT_S = 60.0
CREDENTIAL_ENV = "DUALNAV_ENDPOINT_TOKEN"

STAGE1_PROMPT = (
    "Task: You are an Environment Understanding Assistant. Analyze the 3D Top-Down map and the "
    "accompanying language instruction. Summarize the environment information for navigation planning.\n"
    "Input: [3D Top-Down Map + Language Instruction]\n"
    "Constraints:\n"
    "- Extract the key spatial information of the environment.\n"
    "- Focus on Location, Relationship, and Possible directions.\n"
    "- Keep the output concise and structured.\n"
    "Model Output: JSON\n"
)

STAGE2_PROMPT = (
    "Task: You are a Navigation Planner Assistant. Analyze the images of each waypoint (Frontier 1, "
    "Frontier 2, Frontier 3, etc.) and select the most suitable waypoint for the agent to proceed. "
    "Provide clear reasoning for your choice based on visual cues such as corridor alignment, furniture "
    "arrangement, and spatial orientation.\n"
    "Input: [Waypoint Images for Frontier 1, Frontier 2, Frontier 3, ...]\n"
    "Constraints:\n"
    "- Evaluate each frontier marked in the images.\n"
    "- Explicitly explain why the selected waypoint has the highest probability.\n"
    "- Keep reasoning concise (2-3 sentences max).\n"
    "- Do not suggest waypoints not shown in the images.\n"
    "Model Output: JSON List\n"
)

STAGE1_FIELDS = ("Location", "Relationship", "Possible directions")
STAGE2_FIELDS = ("Selected waypoint", "Reasoning")
VIEW_SCALE = 4
TOPDOWN_SCALE = 4


def encode_request(req: dict) -> bytes:
    return (json.dumps(req, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def request_digest(req: dict) -> str:
    body = {k: v for k, v in req.items() if k != "auth"}
    return hashlib.sha256(encode_request(body)).hexdigest()


def build_stage1_request(topdown_b64: str, instruction: str) -> dict:
    return {
        "stage": 1,
        "prompt": STAGE1_PROMPT,
        "instruction": instruction,
        "topdown_image": topdown_b64,
        "candidates": [],
    }


def build_stage2_request(
    summary: EnvSummary, candidates: Sequence[Candidate], instruction: str, topdown_b64: str
) -> dict:
    return {
        "stage": 2,
        "prompt": STAGE2_PROMPT,
        "instruction": instruction,
        "topdown_image": topdown_b64,
        "summary": summary.to_wire(),
        "candidates": [
            {"label": c.label, "views": [ppm_b64(patch_image(v.patch, VIEW_SCALE)) for v in c.kept_views]}
            for c in candidates
        ],
    }


def topdown_b64(topdown: OccupancyMap, candidates: Sequence[Candidate]) -> str:
    return ppm_b64(map_image(topdown.cells, [c.frontier for c in candidates], scale=TOPDOWN_SCALE))


def parse_reply_object(text: str) -> dict:
    """Accept a JSON object, a list wrapping one, or ``[ "k": "v", ... ]``."""
    text = text.strip()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = None
        if text.startswith("[") and text.endswith("]"):
            try:
                obj = json.loads("{" + text[1:-1] + "}")
            except json.JSONDecodeError:
                obj = None
        if obj is None:
            raise MalformedReply("reply is not JSON") from None
    if isinstance(obj, list):
        if len(obj) != 1:
            raise MalformedReply("reply list must hold exactly one object")
        obj = obj[0]
    if not isinstance(obj, dict):
        raise MalformedReply("reply is not a JSON object")
    return obj


def _field(obj: dict, name: str) -> str:
    if name not in obj:
        raise MalformedReply(f"reply missing field {name!r}", field=name)
    val = obj[name]
    if not isinstance(val, str):
        raise MalformedReply(f"field {name!r} must be a string", field=name)
    return val


def parse_stage1_reply(text: str) -> EnvSummary:
    obj = parse_reply_object(text)
    return EnvSummary(*(_field(obj, k) for k in STAGE1_FIELDS))


def parse_stage2_reply(text: str, n_candidates: int) -> FrontierChoice:
    obj = parse_reply_object(text)
    label = _field(obj, "Selected waypoint").strip()
    reasoning = _field(obj, "Reasoning")
    if len(label) < 2 or label[0] not in "Ff" or not label[1:].isdigit():
        raise InvalidSelection(label, n_candidates)
    idx = int(label[1:]) - 1
    if not 0 <= idx < n_candidates:
        raise InvalidSelection(label, n_candidates)
    return FrontierChoice(idx, reasoning)


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
    return host or "127.0.0.1", int(port)


def exchange(endpoint: str, req: dict, timeout: float = DEFAULT_TIMEOUT_S) -> str:
    """Send one request line and return the reply line."""
    host, port = parse_endpoint(endpoint)
    token = os.environ.get(CREDENTIAL_ENV)
    if token:
        req = {**req, "auth": token}
    try:
        with socket.create_connection((host, port), timeout=timeout) as sock:
            sock.settimeout(timeout)
            sock.sendall(encode_request(req))
            buf = bytearray()
            while not buf.endswith(b"\n"):
                chunk = sock.recv(65536)
                if not chunk:
                    break
                buf.extend(chunk)
    except socket.timeout:
        raise PlannerTimeout(f"no reply from {endpoint} within {timeout} s") from None
    except OSError as exc:
        raise TransportError(f"{endpoint}: {exc}") from None
    if not buf.endswith(b"\n"):
        raise TransportError(f"{endpoint}: connection closed before a full reply")
    try:
        return buf.decode("utf-8").rstrip("\n")
    except UnicodeDecodeError:
        raise MalformedReply("reply is not UTF-8") from None


class RemoteSlowPlanner:
    """Stage 1 summarises the top-down map; stage 2 picks a frontier label."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT_S):
        parse_endpoint(endpoint)
        self.endpoint = endpoint
        self.timeout = timeout
        self.summaries: list[EnvSummary] = []

    def reset(self, spec) -> None:
        self.summaries = []

    def stage1(self, topdown_image: str, instruction: str) -> EnvSummary:
        reply = exchange(self.endpoint, build_stage1_request(topdown_image, instruction), self.timeout)
        return parse_stage1_reply(reply)

    def stage2(
        self, summary: EnvSummary, candidates: Sequence[Candidate], instruction: str, topdown_image: str
    ) -> FrontierChoice:
        req = build_stage2_request(summary, candidates, instruction, topdown_image)
        reply = exchange(self.endpoint, req, self.timeout)
        return parse_stage2_reply(reply, len(candidates))

    def plan(self, topdown: OccupancyMap, candidates: Sequence[Candidate], instruction: str = "") -> FrontierChoice:
        image = topdown_b64(topdown, candidates)
        summary = self.stage1(image, instruction)
        self.summaries.append(summary)
        return self.stage2(summary, candidates, instruction, image)
