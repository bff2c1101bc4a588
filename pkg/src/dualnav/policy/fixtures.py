"""Local model endpoints for offline runs: scripted, recording and replay servers.

A fixture file is JSON lines. Each ``exchange`` record holds the stage,
the SHA-256 of the request (``auth`` excluded), and what the server did:

    {"type": "exchange", "index": 0, "stage": 1, "request_sha256": "...",
     "action": "reply" | "close", "reply": "...", "delay_s": 0.0}

An optional leading ``meta`` record holds the episode settings used while
recording, and an optional trailing ``choices`` record lists the outcome
of every slow request the client saw (arrival or fallback).
"""
from __future__ import annotations

import base64
import json
import socketserver
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..imaging import decode_ppm
from .remote import request_digest


@dataclass(frozen=True)
class ServerAction:
    """What the endpoint does with one request."""

    reply: str = ""
    action: str = "reply"  # or "close": drop the connection without replying
    delay_s: float = 0.0


Responder = Callable[[dict], "ServerAction | str"]


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        line = self.rfile.readline()
        if not line:
            return
        server: ModelServer = self.server.owner  # type: ignore[attr-defined]
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            req = {"_raw": line.decode("utf-8", "replace")}
        act = server.respond(req)
        if act.delay_s:
            time.sleep(act.delay_s)
        if act.action == "close":
            return
        try:
            self.wfile.write(act.reply.replace("\n", " ").encode("utf-8") + b"\n")
        except OSError:  # client gave up (timeout)
            pass


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class ModelServer:
    """Threaded TCP endpoint answering with ``responder``; logs every exchange."""

    def __init__(self, responder: Responder, host: str = "127.0.0.1", port: int = 0):
        self.responder = responder
        self.exchanges: list[dict] = []
        self._lock = threading.Lock()
        self._server = _TCPServer((host, port), _Handler)
        self._server.owner = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def respond(self, req: dict) -> ServerAction:
        with self._lock:
            index = len(self.exchanges)
            act = self.responder(req)
            if isinstance(act, str):
                act = ServerAction(reply=act)
            self.exchanges.append({
                "type": "exchange",
                "index": index,
                "stage": req.get("stage"),
                "request_sha256": request_digest(req),
                "action": act.action,
                "reply": act.reply,
                "delay_s": act.delay_s,
            })
        return act

    def start(self) -> "ModelServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "ModelServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def save(self, path: str | Path, choices: list[dict] | None = None, meta: dict | None = None) -> None:
        lines = [json.dumps({"type": "meta", **meta}, sort_keys=True)] if meta is not None else []
        lines += [json.dumps(e, sort_keys=True) for e in self.exchanges]
        if choices is not None:
            lines.append(json.dumps({"type": "choices", "choices": choices}, sort_keys=True))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class Fixture:
    exchanges: list[dict]
    choices: list[dict] | None = None
    meta: dict | None = None


def load_fixture(path: str | Path) -> Fixture:
    fx = Fixture([])
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {i}: {exc.msg}") from None
        kind = rec.get("type")
        if kind == "exchange":
            fx.exchanges.append(rec)
        elif kind == "choices":
            fx.choices = rec["choices"]
        elif kind == "meta":
            fx.meta = {k: v for k, v in rec.items() if k != "type"}
        else:
            raise ValueError(f"{path}: line {i}: unknown record type {kind!r}")
    return fx


class ReplayServer(ModelServer):
    """Serves a recorded session in order.

    A request whose digest differs from the recording is answered with an
    error object (which the client treats as malformed) and counted in
    ``mismatches``.
    """

    def __init__(self, fixture: str | Path, host: str = "127.0.0.1", port: int = 0):
        fx = load_fixture(fixture)
        self.recorded, self.expected_choices, self.meta = fx.exchanges, fx.choices, fx.meta
        self.mismatches: list[int] = []
        self._cursor = 0
        super().__init__(self._replay, host, port)

    def _replay(self, req: dict) -> ServerAction:
        i = self._cursor
        self._cursor += 1
        if i >= len(self.recorded):
            self.mismatches.append(i)
            return ServerAction(reply='{"error": "fixture exhausted"}')
        rec = self.recorded[i]
        if rec["request_sha256"] != request_digest(req):
            self.mismatches.append(i)
            return ServerAction(reply='{"error": "fixture mismatch"}')
        return ServerAction(reply=rec["reply"], action=rec["action"], delay_s=rec.get("delay_s", 0.0))


def _free_ahead(view_b64: str) -> float:
    """Fraction of free pixels in the forward half of a rendered view."""
    img = decode_ppm(base64.b64decode(view_b64))
    fwd = img[:, img.shape[1] // 2:, :]
    return float(np.mean(np.all(fwd == 255, axis=2)))


class MockModel:
    """Deterministic stand-in for a multimodal model.

    Stage 1 reports map coverage; stage 2 picks the candidate whose last
    kept view shows the most open space ahead (ties: lowest label).
    """

    def __call__(self, req: dict) -> str:
        if req.get("stage") == 1:
            img = decode_ppm(base64.b64decode(req["topdown_image"]))
            known = float(np.mean(~np.all(img == 128, axis=2)))
            return json.dumps({
                "Location": f"The agent is in a corridor network; {known:.0%} of the map is observed.",
                "Relationship": "Walls bound narrow corridors joined at junctions.",
                "Possible directions": "Continue along the corridor toward the unexplored frontiers.",
            }, sort_keys=True)
        cands = req.get("candidates", [])
        scores = [(_free_ahead(c["views"][-1]) if c["views"] else 0.0) for c in cands]
        best = int(np.argmax(scores)) if scores else 0
        label = cands[best]["label"] if cands else "F1"
        return json.dumps({
            "Selected waypoint": label,
            "Reasoning": f"{label} shows the most open corridor ahead in its final view.",
        }, sort_keys=True)
