"""Wire protocol for the debug service.

One JSON object per message, carried either as a WebSocket text frame or as
a newline-terminated line over plain TCP.  Clients attach a monotonically
increasing `seq` to every message; the server echoes it in the single reply.
Broadcasts (values pushes and events) carry no `seq`.
"""

from __future__ import annotations

import json
from typing import Any

from ..diagnostics import E_PROTOCOL

PROTOCOL_VERSION = "maspc-debug/1"
DEFAULT_PORT = 7431
WS_PATH = "/debug"

CLIENT_KINDS = frozenset({
    "hello", "subscribe", "force", "unforce", "setBreakpoint",
    "clearBreakpoint", "run", "pause", "stepCycle", "stepStatement",
})
SERVER_KINDS = frozenset(CLIENT_KINDS | {"values", "event", "error"})


class ProtocolError(Exception):
    def __init__(self, message: str, seq: int | None = None,
                 code: str = E_PROTOCOL):
        super().__init__(message)
        self.message = message
        self.seq = seq
        self.code = code


def _require(doc: dict, key: str, types, seq: int | None) -> Any:
    value = doc.get(key)
    bad = not isinstance(value, types)
    if isinstance(value, bool) and types in (int, float):
        bad = True  # bool is an int subclass; reject unless bool was asked for
    if bad:
        raise ProtocolError(f"'{key}' is missing or has the wrong type", seq)
    return value


def parse_client_message(text: str) -> dict:
    """Validate one inbound message; raises ProtocolError on any defect."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc.msg}")
    if not isinstance(doc, dict):
        raise ProtocolError("message must be a JSON object")
    seq = doc.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise ProtocolError("'seq' must be a non-negative integer")
    kind = doc.get("kind")
    if kind not in CLIENT_KINDS:
        raise ProtocolError(f"unknown kind {kind!r}", seq)

    if kind == "hello":
        _require(doc, "protocol", str, seq)
    elif kind == "subscribe":
        names = _require(doc, "names", list, seq)
        if not all(isinstance(n, str) for n in names):
            raise ProtocolError("'names' must be a list of strings", seq)
        decimation = doc.get("decimation", 1)
        if not isinstance(decimation, int) or isinstance(decimation, bool) \
                or decimation < 1:
            raise ProtocolError("'decimation' must be an integer >= 1", seq)
    elif kind == "force":
        _require(doc, "name", str, seq)
        if not isinstance(doc.get("value"), (bool, int, float)):
            raise ProtocolError("'value' must be a scalar", seq)
    elif kind == "unforce":
        _require(doc, "name", str, seq)
    elif kind in ("setBreakpoint", "clearBreakpoint"):
        _require(doc, "artifact", str, seq)
        index = _require(doc, "index", int, seq)
        if isinstance(index, bool) or index < 0:
            raise ProtocolError("'index' must be a non-negative integer", seq)
        node = doc.get("node")
        if node is not None and not isinstance(node, str):
            raise ProtocolError("'node' must be a string", seq)
    elif kind == "run":
        interval = doc.get("intervalMs", 0)
        if isinstance(interval, bool) or not isinstance(interval, (int, float)) \
                or interval < 0:
            raise ProtocolError("'intervalMs' must be a non-negative number", seq)
    # pause/stepCycle/stepStatement carry no extra fields
    return doc


def encode(message: dict) -> str:
    return json.dumps(message, ensure_ascii=False, separators=(", ", ": "))


def error_reply(seq: int | None, code: str, message: str) -> dict:
    reply: dict = {"kind": "error", "code": code, "message": message}
    if seq is not None:
        reply["seq"] = seq
    return reply
