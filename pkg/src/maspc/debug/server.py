"""Debug service: one simulation shared by any number of client sessions.

A single port serves three traffics, told apart by the first request byte:
HTTP requests (``GET``) either upgrade to a WebSocket on /debug or fetch the
optional static UI bundle; anything else is treated as a newline-framed JSON
stream.  All simulation access happens on the event loop thread, so commands
serialize naturally and never interleave with a scan in progress.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import mimetypes
import struct
from pathlib import Path

from ..codegen import GeneratedProject
from ..diagnostics import E_BAD_STATE, E_RUNTIME, E_UNKNOWN_NAME
from ..st import parser as st_parser
from ..st.interp import BreakpointHit, RuntimeFault
from ..st.sim import Scenario, Simulation, SimulationError
from . import protocol
from .protocol import ProtocolError

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class Session:
    _next_id = 1

    def __init__(self, send):
        self.id = Session._next_id
        Session._next_id += 1
        self.send = send  # async callable(text)
        self.established = False
        self.names: list[str] = []
        self.decimation = 1


class DebugService:
    """Protocol state machine around one Simulation."""

    def __init__(self, sim: Simulation):
        self.sim = sim
        self.sessions: dict[int, Session] = {}
        self.running = False
        self.fault: dict | None = None
        self._run_task: asyncio.Task | None = None
        self._start_interval: float | None = None

    # -- payload builders ---------------------------------------------------

    def mode(self) -> str:
        return "running" if self.running else "paused"

    def _location_payload(self) -> dict | None:
        location = self.sim.paused_location()
        if location is None:
            return None
        node, artifact, index, path = location
        return {"node": node, "artifact": artifact,
                "statementIndex": index, "path": path}

    def _state_fields(self, payload: dict) -> dict:
        payload["cycleCounter"] = self.sim.cycle
        payload["mode"] = self.mode()
        if not self.running:
            location = self._location_payload()
            if location is not None:
                payload["location"] = location
        if self.fault is not None:
            payload["fault"] = self.fault
        return payload

    def values_payload(self, session: Session, seq: int | None = None) -> dict:
        values = {}
        forced = self.sim.forced_names()
        for name in session.names:
            value = self.sim.lookup(name)
            values[name] = {
                "value": value.json(),
                "type": value.type.value,
                "forced": self.sim.canonical_name(name) in forced,
            }
        payload: dict = {"kind": "values", "values": values}
        if seq is not None:
            payload["seq"] = seq
        return self._state_fields(payload)

    def hello_payload(self, seq: int) -> dict:
        nodes = []
        for runtime in self.sim.runtimes:
            node_id = runtime.node_id
            artifacts = []
            for artifact in self.sim.project.per_node[node_id]:
                unit = _unit_for(runtime, artifact.name)
                statements = [
                    {"index": stmt.index, "line": stmt.line}
                    for stmt in _iter_unit_statements(unit)
                ] if unit is not None else []
                artifacts.append({
                    "name": artifact.name,
                    "kind": artifact.kind.value,
                    "breakable": unit is not None,
                    "text": artifact.full_text(),
                    "statements": statements,
                })
            nodes.append({
                "name": runtime.display_name,
                "program": runtime.program.unit.name,
                "artifacts": artifacts,
                "variables": sorted(
                    f"{runtime.display_name}.{path}"
                    for path in runtime.image()),
            })
        return self._state_fields({
            "kind": "hello", "seq": seq,
            "protocol": protocol.PROTOCOL_VERSION, "nodes": nodes,
        })

    # -- broadcasting ---------------------------------------------------------

    async def _send_safe(self, session: Session, payload: dict) -> None:
        try:
            await session.send(protocol.encode(payload))
        except (ConnectionError, asyncio.IncompleteReadError, OSError):
            self.sessions.pop(session.id, None)

    async def broadcast_values(self, always: bool = False) -> None:
        for session in list(self.sessions.values()):
            if not session.established:
                continue
            if not always and self.sim.cycle % session.decimation != 0:
                continue
            await self._send_safe(session, self.values_payload(session))

    async def broadcast_event(self, event: dict) -> None:
        payload = self._state_fields({"kind": "event", **event})
        for session in list(self.sessions.values()):
            if session.established:
                await self._send_safe(session, payload)

    async def _announce_hit(self, hit: BreakpointHit, node: str) -> None:
        await self.broadcast_event({
            "event": "breakpointHit", "node": node,
            "artifact": hit.artifact, "statementIndex": hit.index,
            "path": hit.path,
        })
        await self.broadcast_values(always=True)

    async def _announce_fault(self, fault: RuntimeFault) -> None:
        self.fault = {
            "code": E_RUNTIME, "message": fault.message,
            "node": fault.node, "cycle": fault.cycle,
            "artifact": fault.artifact, "statementIndex": fault.index,
        }
        await self.broadcast_event({"event": "fault", **self.fault})
        await self.broadcast_values(always=True)

    # -- the free-run loop ----------------------------------------------------

    async def _run_loop(self, interval_s: float) -> None:
        while self.running:
            try:
                hit = self.sim.run_cycle()
            except RuntimeFault as fault:
                self.running = False
                await self._announce_fault(fault)
                return
            if hit is not None:
                self.running = False
                location = self.sim.paused_location()
                node = location[0] if location else ""
                await self._announce_hit(hit, node)
                return
            await self.broadcast_values()
            await asyncio.sleep(interval_s)

    # -- command handling -------------------------------------------------------

    async def handle_text(self, session: Session, text: str) -> None:
        try:
            msg = protocol.parse_client_message(text)
        except ProtocolError as exc:
            await self._send_safe(session, protocol.error_reply(
                exc.seq, exc.code, exc.message))
            return
        seq = msg["seq"]
        try:
            reply = await self._dispatch(session, msg)
        except ProtocolError as exc:
            reply = protocol.error_reply(seq, exc.code, exc.message)
        except KeyError as exc:
            reply = protocol.error_reply(
                seq, E_UNKNOWN_NAME, f"unknown name {exc.args[0]!r}")
        except SimulationError as exc:
            reply = protocol.error_reply(seq, exc.code, exc.message)
        await self._send_safe(session, reply)
        if self._start_interval is not None:
            # start free-running only after the run reply went out
            interval, self._start_interval = self._start_interval, None
            self._run_task = asyncio.ensure_future(self._run_loop(interval))

    async def _dispatch(self, session: Session, msg: dict) -> dict:
        kind, seq = msg["kind"], msg["seq"]
        if kind == "hello":
            if msg["protocol"] != protocol.PROTOCOL_VERSION:
                raise ProtocolError(
                    f"unsupported protocol {msg['protocol']!r}; "
                    f"this server speaks {protocol.PROTOCOL_VERSION}", seq)
            session.established = True
            return self.hello_payload(seq)
        if not session.established:
            raise ProtocolError("hello required before any other command", seq)

        if kind == "subscribe":
            canonical = [self.sim.canonical_name(n) for n in msg["names"]]
            session.names = canonical
            session.decimation = msg.get("decimation", 1)
            return self.values_payload(session, seq)
        if kind == "force":
            name = self.sim.set_force(msg["name"], msg["value"])
            value = self.sim.lookup(name)
            return self._state_fields({
                "kind": "force", "seq": seq, "name": name,
                "value": value.json(),
            })
        if kind == "unforce":
            name = self.sim.clear_force(msg["name"])
            return self._state_fields({
                "kind": "unforce", "seq": seq, "name": name,
            })
        if kind in ("setBreakpoint", "clearBreakpoint"):
            toggle = (self.sim.set_breakpoint if kind == "setBreakpoint"
                      else self.sim.clear_breakpoint)
            nodes = toggle(msg["artifact"], msg["index"], msg.get("node"))
            return self._state_fields({
                "kind": kind, "seq": seq, "artifact": msg["artifact"],
                "index": msg["index"], "nodes": nodes,
            })
        if kind == "pause":
            self.running = False
            if self._run_task is not None:
                await self._run_task
                self._run_task = None
            return self._state_fields({"kind": "pause", "seq": seq})

        # state-changing commands below require a paused, healthy simulation
        if self.fault is not None:
            raise ProtocolError(
                f"simulation faulted: {self.fault['message']}", seq,
                code=E_BAD_STATE)
        if self.running:
            raise ProtocolError(
                f"'{kind}' requires a paused simulation", seq,
                code=E_BAD_STATE)

        if kind == "run":
            self.running = True
            self._start_interval = float(msg.get("intervalMs", 0)) / 1000.0
            return self._state_fields({"kind": "run", "seq": seq})
        if kind == "stepCycle":
            hit = await self._guarded(seq, self.sim.run_cycle)
            if hit is None:
                await self.broadcast_values()
            else:
                await self._announce_after_hit(hit)
            return self._state_fields({"kind": "stepCycle", "seq": seq})
        if kind == "stepStatement":
            before = self.sim.cycle
            hit = await self._guarded(seq, self.sim.step_statement)
            if hit is not None:
                await self._announce_after_hit(hit)
            elif self.sim.cycle != before:
                await self.broadcast_values()
            return self._state_fields({"kind": "stepStatement", "seq": seq})
        raise ProtocolError(f"unhandled kind '{kind}'", seq)  # pragma: no cover

    async def _guarded(self, seq: int, action):
        try:
            return action()
        except RuntimeFault as fault:
            await self._announce_fault(fault)
            raise ProtocolError(str(fault), seq, code=E_RUNTIME)

    async def _announce_after_hit(self, hit: BreakpointHit) -> None:
        location = self.sim.paused_location()
        node = location[0] if location else ""
        await self._announce_hit(hit, node)


def _unit_for(runtime, artifact_name: str):
    lowered = artifact_name.lower()
    if runtime.program.unit.name.lower() == lowered:
        return runtime.program.unit
    return runtime.fb_units.get(lowered)


def _iter_unit_statements(unit):
    return st_parser.iter_statements(unit.body)


# -- transports ---------------------------------------------------------------


async def _read_http_request(first: bytes, reader) -> tuple[str, str, dict]:
    line = first + await reader.readline()
    parts = line.decode("latin-1").split()
    if len(parts) < 3:
        raise ConnectionError("bad request line")
    method, target = parts[0], parts[1]
    headers: dict[str, str] = {}
    while True:
        raw = await reader.readline()
        if raw in (b"\r\n", b"\n", b""):
            break
        name, _, value = raw.decode("latin-1").partition(":")
        headers[name.strip().lower()] = value.strip()
    return method, target, headers


def _http_response(status: str, body: bytes, content_type: str) -> bytes:
    head = (f"HTTP/1.1 {status}\r\nContent-Type: {content_type}\r\n"
            f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n")
    return head.encode("latin-1") + body


async def _ws_send_text(writer, text: str) -> None:
    data = text.encode("utf-8")
    length = len(data)
    if length < 126:
        header = struct.pack("!BB", 0x81, length)
    elif length < 65536:
        header = struct.pack("!BBH", 0x81, 126, length)
    else:
        header = struct.pack("!BBQ", 0x81, 127, length)
    writer.write(header + data)
    await writer.drain()


async def _ws_read_message(reader, pong) -> str | None:
    """Read one text message; answers pings, reassembles fragments;
    None means the peer closed."""
    buffer = b""
    while True:
        head = await reader.readexactly(2)
        fin = head[0] & 0x80
        opcode = head[0] & 0x0F
        masked = head[1] & 0x80
        length = head[1] & 0x7F
        if length == 126:
            length = struct.unpack("!H", await reader.readexactly(2))[0]
        elif length == 127:
            length = struct.unpack("!Q", await reader.readexactly(8))[0]
        mask = await reader.readexactly(4) if masked else b""
        payload = await reader.readexactly(length)
        if mask:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        if opcode == 0x8:  # close
            return None
        if opcode == 0x9:  # ping
            await pong(payload)
            continue
        if opcode in (0x1, 0x0):
            buffer += payload
            if fin:
                return buffer.decode("utf-8")
        # other opcodes (binary, pong) are ignored


class DebugServer:
    """Socket front door: WebSocket, raw TCP, and optional static UI."""

    def __init__(self, service: DebugService, host: str = "127.0.0.1",
                 port: int = protocol.DEFAULT_PORT,
                 ui_dir: str | Path | None = None):
        self.service = service
        self.host = host
        self.port = port
        self.ui_dir = Path(ui_dir) if ui_dir is not None else None
        self._server: asyncio.AbstractServer | None = None

    async def start(self) -> None:
        self._server = await asyncio.start_server(
            self._on_connection, self.host, self.port)
        self.port = self._server.sockets[0].getsockname()[1]

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        if self.service._run_task is not None:
            self.service.running = False
            await self.service._run_task

    async def serve_forever(self) -> None:
        assert self._server is not None
        await self._server.serve_forever()

    # -- connection dispatch ----------------------------------------------

    async def _on_connection(self, reader, writer) -> None:
        try:
            first = await reader.read(1)
            if not first:
                return
            if first == b"G":
                await self._serve_http(first, reader, writer)
            else:
                await self._serve_tcp(first, reader, writer)
        except (ConnectionError, asyncio.IncompleteReadError, OSError):
            pass
        finally:
            try:
                writer.close()
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    async def _serve_http(self, first, reader, writer) -> None:
        method, target, headers = await _read_http_request(first, reader)
        path = target.split("?", 1)[0]
        if (path == protocol.WS_PATH
                and headers.get("upgrade", "").lower() == "websocket"):
            await self._serve_websocket(reader, writer, headers)
            return
        if method != "GET" or self.ui_dir is None:
            writer.write(_http_response("404 Not Found", b"not found\n",
                                        "text/plain; charset=utf-8"))
            await writer.drain()
            return
        await self._serve_static(path, writer)

    async def _serve_static(self, path: str, writer) -> None:
        name = path.lstrip("/") or "index.html"
        root = self.ui_dir.resolve()
        candidate = (root / name).resolve()
        if root not in candidate.parents and candidate != root:
            writer.write(_http_response("404 Not Found", b"not found\n",
                                        "text/plain; charset=utf-8"))
            await writer.drain()
            return
        if candidate.is_dir():
            candidate = candidate / "index.html"
        if not candidate.is_file():
            writer.write(_http_response("404 Not Found", b"not found\n",
                                        "text/plain; charset=utf-8"))
            await writer.drain()
            return
        ctype = mimetypes.guess_type(candidate.name)[0] or "application/octet-stream"
        if ctype.startswith("text/") or ctype in ("application/javascript",
                                                  "application/json"):
            ctype += "; charset=utf-8"
        writer.write(_http_response("200 OK", candidate.read_bytes(), ctype))
        await writer.drain()

    async def _serve_websocket(self, reader, writer, headers) -> None:
        key = headers.get("sec-websocket-key")
        if not key:
            writer.write(_http_response("400 Bad Request", b"missing key\n",
                                        "text/plain; charset=utf-8"))
            await writer.drain()
            return
        accept = base64.b64encode(hashlib.sha1(
            (key + _WS_GUID).encode("latin-1")).digest()).decode("latin-1")
        writer.write((
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\nConnection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n").encode("latin-1"))
        await writer.drain()

        send_lock = asyncio.Lock()

        async def send(text: str) -> None:
            async with send_lock:
                await _ws_send_text(writer, text)

        async def pong(payload: bytes) -> None:
            async with send_lock:
                writer.write(struct.pack("!BB", 0x8A, len(payload)) + payload)
                await writer.drain()

        session = Session(send)
        self.service.sessions[session.id] = session
        try:
            while True:
                message = await _ws_read_message(reader, pong)
                if message is None:
                    break
                await self.service.handle_text(session, message)
        finally:
            self.service.sessions.pop(session.id, None)

    async def _serve_tcp(self, first, reader, writer) -> None:
        send_lock = asyncio.Lock()

        async def send(text: str) -> None:
            async with send_lock:
                writer.write(text.encode("utf-8") + b"\n")
                await writer.drain()

        session = Session(send)
        self.service.sessions[session.id] = session
        try:
            pending = first
            while True:
                line = pending + await reader.readline()
                pending = b""
                if not line.strip():
                    if not line:
                        break
                    continue
                await self.service.handle_text(
                    session, line.decode("utf-8", "replace").strip())
        finally:
            self.service.sessions.pop(session.id, None)


def serve(project: GeneratedProject, scenario: Scenario | None = None,
          host: str = "127.0.0.1", port: int = protocol.DEFAULT_PORT,
          ui_dir: str | Path | None = None,
          ready=None) -> None:
    """Run the debug service until interrupted.  The simulation starts
    paused at cycle 0; clients drive it."""
    sim = Simulation(project, scenario)
    service = DebugService(sim)
    server = DebugServer(service, host, port, ui_dir)

    async def main() -> None:
        await server.start()
        if ready is not None:
            ready(server)
        try:
            await server.serve_forever()
        except asyncio.CancelledError:
            pass
        finally:
            await server.close()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
