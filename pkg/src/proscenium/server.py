"""Live control surface: NDJSON commands over TCP plus HTTP frame endpoints.

One JSON object per LF-terminated line. Requests carry an integer ``id`` and
a ``cmd``; every request gets exactly one reply with the matching id. Tick
events (``{"event": "tick", "tick": n}``) are broadcast to every connected
client. Frames and state are served over plain HTTP on a second port
(command port + 1 by default); see docs/protocol.md.

All clients feed one serialized queue drained by the engine thread, so
commands from any number of connections apply in a single total order and
the session stays deterministic and replayable.
"""

from __future__ import annotations

import io
import json
import queue
import socket
import socketserver
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
from PIL import Image

from . import calibration as cal
from .compositor import Viewpoint
from .core import DomainError, PixelBuffer, to_pam_bytes, to_ppm_bytes
from .profile import ExperienceProfile
from .runtime import Engine, command_from_wire, command_to_wire

DEFAULT_PORT = 7470

WIRE_COMMANDS = {
    "trigger", "set_eye", "set_separation", "set_param", "query",
    "step", "pause", "resume", "load_profile",
}


@dataclass(frozen=True)
class Snapshot:
    tick: int
    front: PixelBuffer
    back: PixelBuffer
    composite: PixelBuffer
    state: dict


class _TcpClient:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.lock = threading.Lock()
        self.alive = True

    def send_json(self, obj: dict) -> None:
        data = (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")
        with self.lock:
            if not self.alive:
                return
            try:
                self.sock.sendall(data)
            except OSError:
                self.alive = False


@dataclass
class _Request:
    payload: dict
    client: _TcpClient | None = None
    channel: "queue.Queue[dict] | None" = None


class Session:
    """Engine thread: drains the request queue, paces ticks, keeps snapshots."""

    def __init__(self, engine: Engine, rate_hz: int = 30):
        if rate_hz <= 0:
            raise DomainError("rate must be positive")
        self.engine = engine
        self.rate_hz = rate_hz
        self.requests: queue.Queue[_Request] = queue.Queue()
        self.paused = False
        self.clients: set[_TcpClient] = set()
        self.clients_lock = threading.Lock()
        self._snapshot: Snapshot | None = None
        self._snapshot_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._last_broadcast_tick = -1
        self._refresh_snapshot()

    # -- public --------------------------------------------------------------
    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="session", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def submit(self, payload: dict, client: _TcpClient | None = None,
               channel: "queue.Queue[dict] | None" = None) -> None:
        self.requests.put(_Request(payload, client, channel))

    def snapshot(self) -> Snapshot:
        with self._snapshot_lock:
            return self._snapshot

    def add_client(self, client: _TcpClient) -> None:
        with self.clients_lock:
            self.clients.add(client)

    def drop_client(self, client: _TcpClient) -> None:
        with self.clients_lock:
            self.clients.discard(client)

    def command_log_lines(self) -> list[str]:
        lines = []
        for tick, cmd, origin in list(self.engine.command_log):
            obj = {"tick": tick, "origin": origin}
            obj.update(command_to_wire(cmd))
            lines.append(json.dumps(obj, separators=(",", ":")))
        return lines

    # -- engine thread ---------------------------------------------------------
    def _run(self) -> None:
        period = 1.0 / self.rate_hz
        next_due = time.monotonic() + period
        while not self._stop.is_set():
            worked = False
            while True:
                try:
                    req = self.requests.get_nowait()
                except queue.Empty:
                    break
                self._handle(req)
                worked = True
            now = time.monotonic()
            if not self.paused and now >= next_due:
                self.engine.step([])
                self._refresh_snapshot()
                self._broadcast_tick()
                worked = True
                next_due += period
                if next_due < now:  # fell behind; do not burst to catch up
                    next_due = now + period
            if not worked:
                wait = 0.002 if self.paused else max(0.0, min(next_due - time.monotonic(), 0.002))
                time.sleep(wait)

    def _refresh_snapshot(self) -> None:
        front, back, frame = self.engine.render()
        state = self.engine.snapshot("all")
        state["paused"] = self.paused
        snap = Snapshot(tick=self.engine.tick, front=front, back=back,
                        composite=frame.buffer, state=state)
        with self._snapshot_lock:
            self._snapshot = snap

    def _broadcast_tick(self) -> None:
        tick = self.engine.tick
        if tick == self._last_broadcast_tick:
            return
        self._last_broadcast_tick = tick
        event = {"event": "tick", "tick": tick}
        with self.clients_lock:
            targets = list(self.clients)
        for client in targets:
            client.send_json(event)

    def _handle(self, req: _Request) -> None:
        reply = self._execute(req.payload)
        # Refresh before replying so anyone who has seen the reply observes
        # the post-command snapshot (read-your-writes for /frame and /state).
        self._refresh_snapshot()
        self._broadcast_tick()
        if req.channel is not None:
            req.channel.put(reply)
        elif req.client is not None:
            req.client.send_json(reply)

    def _execute(self, payload: dict) -> dict:
        rid = payload.get("id")
        if not isinstance(rid, int) or isinstance(rid, bool):
            return {"id": None, "ok": False, "error": "parse: request needs an integer 'id'"}
        name = payload.get("cmd")
        if name not in WIRE_COMMANDS:
            return {"id": rid, "ok": False, "error": f"unknown command {name!r}"}
        if name == "pause":
            self.paused = True
            return {"id": rid, "ok": True, "data": {"paused": True, "tick": self.engine.tick}}
        if name == "resume":
            self.paused = False
            return {"id": rid, "ok": True, "data": {"paused": False, "tick": self.engine.tick}}
        try:
            command = command_from_wire(payload)
        except DomainError as exc:
            return {"id": rid, "ok": False, "error": str(exc)}
        ok, data = self.engine.handle_command(command)
        if not ok:
            return {"id": rid, "ok": False, "error": data}
        return {"id": rid, "ok": True, "data": data}


# ---------------------------------------------------------------------------
# TCP command listener

class _CommandServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr, session: Session):
        self.session = session
        super().__init__(addr, _CommandHandler)


class _CommandHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        session: Session = self.server.session
        client = _TcpClient(self.connection)
        session.add_client(client)
        try:
            while True:
                line = self.rfile.readline()
                if not line:
                    break
                line = line.strip()
                if not line:
                    continue
                try:
                    payload = json.loads(line.decode("utf-8"))
                    if not isinstance(payload, dict):
                        raise ValueError("not an object")
                except (ValueError, UnicodeDecodeError) as exc:
                    rid = None
                    client.send_json({"id": rid, "ok": False, "error": f"parse: {exc}"})
                    continue
                session.submit(payload, client=client)
        finally:
            client.alive = False
            session.drop_client(client)


# ---------------------------------------------------------------------------
# HTTP frame/state endpoints

def _png_bytes(buf: PixelBuffer, with_alpha: bool) -> bytes:
    arr = np.clip(np.rint(buf.data * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(arr, mode="RGBA") if with_alpha else Image.fromarray(arr[..., :3], mode="RGB")
    out = io.BytesIO()
    img.save(out, format="PNG")
    return out.getvalue()


class _HttpHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def session(self) -> Session:
        return self.server.session  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # silence per-request stderr noise
        pass

    def _send(self, code: int, content_type: str, body: bytes, extra: dict | None = None) -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        for k, v in (extra or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, code: int, obj: dict) -> None:
        self._send(code, "application/json", json.dumps(obj).encode("utf-8"))

    def do_OPTIONS(self) -> None:
        self._send(204, "text/plain", b"")

    def do_GET(self) -> None:
        path = self.path.split("?", 1)[0]
        if path == "/state":
            snap = self.session.snapshot()
            self._send_json(200, snap.state)
            return
        if path == "/log":
            body = ("\n".join(self.session.command_log_lines()) + "\n").encode("utf-8")
            self._send(200, "application/x-ndjson", body)
            return
        if path.startswith("/frame/"):
            which = path.removeprefix("/frame/")
            snap = self.session.snapshot()
            buffers = {"composite": snap.composite, "front": snap.front, "back": snap.back}
            if which not in buffers:
                self._send_json(404, {"error": f"unknown frame '{which}'"})
                return
            accept = self.headers.get("Accept", "")
            buf = buffers[which]
            tick_header = {"X-Tick": str(snap.tick)}
            if "portable" in accept or "ppm" in accept or "pam" in accept:
                if which == "composite":
                    self._send(200, "image/x-portable-pixmap", to_ppm_bytes(buf), tick_header)
                else:
                    self._send(200, "image/x-portable-arbitrarymap", to_pam_bytes(buf), tick_header)
            else:
                self._send(200, "image/png", _png_bytes(buf, with_alpha=which != "composite"),
                           tick_header)
            return
        self._send_json(404, {"error": f"unknown path '{path}'"})

    def do_POST(self) -> None:
        path = self.path.split("?", 1)[0]
        if path != "/cmd":
            self._send_json(404, {"error": f"unknown path '{path}'"})
            return
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length)
        try:
            payload = json.loads(body.decode("utf-8"))
            if not isinstance(payload, dict):
                raise ValueError("not an object")
        except (ValueError, UnicodeDecodeError) as exc:
            self._send_json(200, {"id": None, "ok": False, "error": f"parse: {exc}"})
            return
        channel: queue.Queue[dict] = queue.Queue(maxsize=1)
        self.session.submit(payload, channel=channel)
        try:
            reply = channel.get(timeout=10.0)
        except queue.Empty:
            self._send_json(200, {"id": payload.get("id"), "ok": False, "error": "engine timeout"})
            return
        self._send_json(200, reply)


class _FrameServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, session: Session):
        self.session = session
        super().__init__(addr, _HttpHandler)


# ---------------------------------------------------------------------------
# Front door

class ProsceniumServer:
    """Bundled command listener, HTTP endpoints, and engine session."""

    def __init__(self, profile: ExperienceProfile, asset_root: str | Path = ".",
                 port: int = DEFAULT_PORT, http_port: int | None = None,
                 rate_hz: int = 30, eye: Viewpoint | None = None,
                 calibration: cal.SimilarityTransform | None = None):
        engine = Engine(profile, asset_root=asset_root, eye=eye, calibration=calibration)
        self.session = Session(engine, rate_hz=rate_hz)
        self.tcp = _CommandServer(("127.0.0.1", port), self.session)
        actual_port = self.tcp.server_address[1]
        if http_port is None:
            http_port = actual_port + 1 if port != 0 else 0
        self.http = _FrameServer(("127.0.0.1", http_port), self.session)
        self._threads: list[threading.Thread] = []

    @property
    def command_port(self) -> int:
        return self.tcp.server_address[1]

    @property
    def http_port(self) -> int:
        return self.http.server_address[1]

    def start(self) -> None:
        self.session.start()
        for target, name in ((self.tcp.serve_forever, "tcp"), (self.http.serve_forever, "http")):
            t = threading.Thread(target=target, kwargs={"poll_interval": 0.05},
                                 name=f"serve-{name}", daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self.tcp.shutdown()
        self.http.shutdown()
        self.session.stop()
        self.tcp.server_close()
        self.http.server_close()


def serve(profile: ExperienceProfile, asset_root: str | Path = ".",
          port: int = DEFAULT_PORT, rate_hz: int = 30,
          http_port: int | None = None) -> int:
    """Blocking entry point used by the CLI ``serve`` subcommand."""
    server = ProsceniumServer(profile, asset_root=asset_root, port=port,
                              http_port=http_port, rate_hz=rate_hz)
    server.start()
    print(f"commands: tcp://127.0.0.1:{server.command_port}  "
          f"frames: http://127.0.0.1:{server.http_port}", flush=True)
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0
