import json
import socket
import threading
import time
import urllib.request

import numpy as np
import pytest

from proscenium.cli import main as cli_main
from proscenium.profile import parse_profile
from proscenium.server import ProsceniumServer


@pytest.fixture()
def server(fixtures_dir):
    profile = parse_profile((fixtures_dir / "e1_hand.prof").read_text())
    srv = ProsceniumServer(profile, asset_root=fixtures_dir, port=0, rate_hz=30)
    srv.start()
    yield srv
    srv.stop()


class Client:
    """Minimal line-oriented protocol client for tests."""

    def __init__(self, port: int):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=5)
        self.file = self.sock.makefile("r", encoding="utf-8")
        self.events: list[dict] = []
        self.next_id = 1

    def close(self):
        self.sock.close()

    def send_raw(self, text: str):
        self.sock.sendall(text.encode("utf-8"))

    def request(self, cmd: str, timeout: float = 5.0, **args) -> dict:
        rid = self.next_id
        self.next_id += 1
        payload = {"id": rid, "cmd": cmd, **args}
        self.send_raw(json.dumps(payload) + "\n")
        return self.wait_reply(rid, timeout)

    def wait_reply(self, rid, timeout: float = 5.0) -> dict:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            line = self.file.readline()
            if not line:
                raise AssertionError("connection closed while waiting for reply")
            obj = json.loads(line)
            if "event" in obj:
                self.events.append(obj)
                continue
            if obj.get("id") == rid or obj.get("id") is None:
                return obj
            raise AssertionError(f"unexpected reply id {obj!r} while waiting for {rid}")
        raise AssertionError("timed out waiting for reply")

    def drain_events(self, duration: float) -> list[dict]:
        deadline = time.monotonic() + duration
        got = []
        self.sock.settimeout(0.1)
        try:
            while time.monotonic() < deadline:
                try:
                    line = self.file.readline()
                except (TimeoutError, socket.timeout):
                    continue
                if not line:
                    break
                obj = json.loads(line)
                if "event" in obj:
                    got.append(obj)
        finally:
            self.sock.settimeout(5)
        return got


def http_get(port: int, path: str, accept: str | None = None):
    req = urllib.request.Request(f"http://127.0.0.1:{port}{path}")
    if accept:
        req.add_header("Accept", accept)
    with urllib.request.urlopen(req, timeout=5) as resp:
        return resp.status, dict(resp.headers), resp.read()


class TestCommands:
    def test_trigger_known_cue(self, server):
        c = Client(server.command_port)
        try:
            reply = c.request("trigger", cue="raise")
            assert reply["ok"] is True
            assert reply["data"]["cue"] == "raise"
        finally:
            c.close()

    def test_trigger_unknown_cue_names_it(self, server):
        c = Client(server.command_port)
        try:
            reply = c.request("trigger", cue="nope")
            assert reply["ok"] is False
            assert "nope" in reply["error"]
        finally:
            c.close()

    def test_pause_step_query_midpoint(self, server):
        c = Client(server.command_port)
        try:
            assert c.request("pause")["ok"]
            assert c.request("trigger", cue="raise")["ok"]
            step = c.request("step", n=15)
            assert step["ok"]
            snap = c.request("query", topic="entities")
            assert snap["ok"]
            alpha = snap["data"]["entities"]["h1"]["front"]["alpha"]
            assert alpha == pytest.approx(0.5, abs=1e-9)
        finally:
            c.close()

    def test_resume_continues_without_skipping(self, server):
        c = Client(server.command_port)
        try:
            assert c.request("pause")["ok"]
            paused_tick = c.request("query", topic="tick")["data"]["tick"]
            assert c.request("resume")["ok"]
            events = c.drain_events(0.5)
            assert events, "expected tick events after resume"
            assert events[0]["tick"] == paused_tick + 1
            ticks = [e["tick"] for e in events]
            assert ticks == sorted(ticks)
        finally:
            c.close()

    def test_set_separation_zero_rejected(self, server):
        c = Client(server.command_port)
        try:
            reply = c.request("set_separation", separation_m=0)
            assert reply["ok"] is False
            assert "> 0" in reply["error"]
        finally:
            c.close()

    def test_set_eye_applies(self, server):
        c = Client(server.command_port)
        try:
            assert c.request("pause")["ok"]
            assert c.request("set_eye", eye=[0.1, -0.1, 2.0])["ok"]
            snap = c.request("query", topic="all")
            assert snap["data"]["eye"] == [0.1, -0.1, 2.0]
        finally:
            c.close()

    def test_malformed_lines_get_parse_error_and_keep_connection(self, server):
        c = Client(server.command_port)
        try:
            c.send_raw("this is not json\n")
            reply = c.wait_reply(None)
            assert reply["ok"] is False
            assert "parse" in reply["error"]
            c.send_raw('{"cmd": "trigger", "cue": "raise"}\n')  # no id
            reply = c.wait_reply(None)
            assert reply["ok"] is False
            # Still alive afterwards.
            assert c.request("query", topic="tick")["ok"]
        finally:
            c.close()

    def test_fuzz_random_bytes_never_kill_server(self, server):
        rng = np.random.default_rng(81)
        c = Client(server.command_port)
        try:
            for _ in range(50):
                blob = bytes(int(b) for b in rng.integers(1, 256, size=rng.integers(1, 80)))
                blob = blob.replace(b"\n", b" ")
                c.send_raw(blob.decode("latin-1") + "\n")
                reply = c.wait_reply(None, timeout=5)
                assert reply["ok"] is False
            assert c.request("query", topic="tick")["ok"]
        finally:
            c.close()


class TestMultiClient:
    def test_three_clients_bijective_replies(self, server):
        clients = [Client(server.command_port) for _ in range(3)]
        try:
            assert clients[0].request("pause")["ok"]
            results: dict[int, list] = {}

            def worker(idx: int, client: Client):
                replies = []
                for k in range(20):
                    if k % 3 == 0:
                        replies.append(client.request("query", topic="tick"))
                    elif k % 3 == 1:
                        replies.append(client.request("trigger", cue="raise"))
                    else:
                        replies.append(client.request("set_eye", eye=[0.0, 0.0, 1.0 + idx]))
                results[idx] = replies

            threads = [threading.Thread(target=worker, args=(i, c))
                       for i, c in enumerate(clients)]
            for t in threads:
                t.start()
            for t in threads:
                t.join(timeout=30)
            for idx, replies in results.items():
                assert len(replies) == 20
                # Ids are per-client sequential; replies must match 1:1.
                ids = [r["id"] for r in replies]
                assert ids == list(range(2, 22)) if idx == 0 else list(range(1, 21))
                assert all(r["ok"] for r in replies)
        finally:
            for c in clients:
                c.close()

    def test_last_writer_wins_total_order(self, server):
        a = Client(server.command_port)
        b = Client(server.command_port)
        try:
            assert a.request("pause")["ok"]
            assert a.request("set_eye", eye=[0.0, 0.0, 1.0])["ok"]
            assert b.request("set_eye", eye=[0.0, 0.0, 2.0])["ok"]
            snap = a.request("query", topic="all")
            assert snap["data"]["eye"] == [0.0, 0.0, 2.0]
        finally:
            a.close()
            b.close()


class TestHttpEndpoints:
    def test_state_reflects_engine(self, server):
        c = Client(server.command_port)
        try:
            assert c.request("pause")["ok"]
            status, _, body = http_get(server.http_port, "/state")
            assert status == 200
            state = json.loads(body)
            assert state["paused"] is True
            assert state["cues"] == ["raise"]
            assert "h1" in state["entities"]
        finally:
            c.close()

    def test_frame_png_default(self, server):
        status, headers, body = http_get(server.http_port, "/frame/composite")
        assert status == 200
        assert headers["Content-Type"] == "image/png"
        assert body.startswith(b"\x89PNG")

    def test_frame_netpbm_by_accept(self, server):
        status, headers, body = http_get(server.http_port, "/frame/composite",
                                         accept="image/x-portable-pixmap")
        assert status == 200
        assert body.startswith(b"P6\n")
        status, headers, body = http_get(server.http_port, "/frame/front",
                                         accept="image/x-portable-pixmap")
        assert body.startswith(b"P7\n")

    def test_frame_staleness_bound(self, server):
        for _ in range(5):
            _, headers, _ = http_get(server.http_port, "/frame/composite")
            frame_tick = int(headers["X-Tick"])
            _, _, body = http_get(server.http_port, "/state")
            state_tick = json.loads(body)["tick"]
            assert state_tick - 1 <= frame_tick <= state_tick + 1

    def test_unknown_paths_404(self, server):
        with pytest.raises(urllib.error.HTTPError) as err:
            http_get(server.http_port, "/frame/nope")
        assert err.value.code == 404
        with pytest.raises(urllib.error.HTTPError) as err:
            http_get(server.http_port, "/bogus")
        assert err.value.code == 404

    def test_post_cmd_bridge(self, server):
        body = json.dumps({"id": 9, "cmd": "query", "topic": "tick"}).encode()
        req = urllib.request.Request(
            f"http://127.0.0.1:{server.http_port}/cmd", data=body,
            headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=5) as resp:
            reply = json.loads(resp.read())
        assert reply["id"] == 9
        assert reply["ok"] is True


class TestSessionReplay:
    def test_command_log_replays_to_identical_manifests(self, server, fixtures_dir, tmp_path):
        c = Client(server.command_port)
        try:
            assert c.request("pause")["ok"]
            assert c.request("trigger", cue="raise")["ok"]
            assert c.request("step", n=10)["ok"]
            assert c.request("set_eye", eye=[0.2, 0.0, 1.5])["ok"]
            assert c.request("step", n=10)["ok"]
            final_tick = c.request("query", topic="tick")["data"]["tick"]

            live_ppm = http_get(server.http_port, "/frame/composite",
                                accept="image/x-portable-pixmap")[2]
            live_front = http_get(server.http_port, "/frame/front",
                                  accept="image/x-portable-pixmap")[2]
            _, _, log = http_get(server.http_port, "/log")
        finally:
            c.close()

        log_path = tmp_path / "session.ndjson"
        log_path.write_bytes(log)
        manifests = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = cli_main(["render", "--profile", str(fixtures_dir / "e1_hand.prof"),
                             "--commands", str(log_path), "--out", str(out),
                             "--frames", str(final_tick + 1)])
            assert code == 0
            manifests.append((out / "manifest.txt").read_bytes())
        assert manifests[0] == manifests[1]

        # The offline frame at the paused tick matches the live one.
        offline_ppm = (tmp_path / "a" / f"composite_{final_tick:05d}.ppm").read_bytes()
        assert offline_ppm == live_ppm
        offline_front = (tmp_path / "a" / f"front_{final_tick:05d}.pam").read_bytes()
        assert offline_front == live_front
