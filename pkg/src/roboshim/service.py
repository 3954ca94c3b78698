"""Network bridge for live teleoperation.

One control loop owns the environment and ticks at a fixed period.  Network
sessions never touch the robot directly: a single *controller* websocket
feeds commands into a queue, the loop applies at most the latest pending
action per tick (stale ones are superseded), and every connected client —
controller and observers alike — receives a state message each tick.

HTTP endpoints::

    GET /info                          resolved service configuration
    GET /episodes                      completed episodes under the root
    GET /camera/<name>/rgb.png         latest RGB (X-Frame-Seq/-Timestamp)
    GET /camera/<name>/depth.png       normalized depth, ?near=&far= meters
    GET /ws?role=controller|observer   message channel (default observer)

Channel messages are single JSON objects: outbound ``{"type": "state", ...}``
at the control rate; inbound ``{"type": "action", ...wire action...}``,
``{"type": "recorder", "cmd": start|stop|discard}``, or ``{"type": "reset"}``.
A second would-be controller is closed with reason "controller busy".

Actions arrive over an asynchronous channel, so a blocking flag is
meaningless here; the service strips it and streams every command.
"""

from __future__ import annotations

import errno
import io
import json
import queue
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np
from PIL import Image

from .actions import ActionError, ActionFrame, from_wire
from .camera import BadRange, normalize_depth
from .devices import KeyBindings
from .recording import EpisodeRecorder, list_episodes
from .ws import WebSocket, WebSocketError, server_handshake

__all__ = ["PortInUse", "UnknownCamera", "TeleopService", "state_message"]


class PortInUse(OSError):
    pass


class UnknownCamera(KeyError):
    pass


def state_message(state, *, clipped: bool, limited: bool, workspace,
                  recording: bool) -> dict:
    p = state.tcp_pose
    return {
        "type": "state",
        "t": state.timestamp,
        "tcp_pos": [float(c) for c in p.position],
        "tcp_orn": [p.orientation.x, p.orientation.y, p.orientation.z, p.orientation.w],
        "gripper": state.gripper_width,
        "moving": state.moving,
        "clipped": clipped,
        "limited": limited,
        "workspace": workspace.to_dict() if workspace is not None else None,
        "recording": recording,
    }


class _Client:
    def __init__(self, sock: WebSocket, role: str):
        self.ws = sock
        self.role = role


class TeleopService:
    """serve(env, port): the long-running human-in-the-loop bridge."""

    def __init__(self, env, *, period: float = 0.05, host: str = "127.0.0.1",
                 port: int = 0, episode_root="episodes",
                 bindings: KeyBindings | None = None):
        if not period > 0:
            raise ValueError(f"period must be positive, got {period!r}")
        self.env = env
        self.period = float(period)
        self.host = host
        self._want_port = int(port)
        self.episode_root = Path(episode_root)
        self.bindings = bindings or KeyBindings.default()
        self.recorder = EpisodeRecorder.for_env(env)

        self._commands: queue.SimpleQueue = queue.SimpleQueue()
        self._clients: list[_Client] = []
        self._controller: _Client | None = None
        self._clients_lock = threading.Lock()
        self._snapshot = None          # latest Observation, for the HTTP side
        self._flags = {"clipped": False, "limited": False}
        self._state_lock = threading.Lock()
        self._running = False
        self._httpd = None
        self._threads: list[threading.Thread] = []

    # ------------------------------------------------------------ lifecycle

    @property
    def port(self) -> int:
        if self._httpd is None:
            raise RuntimeError("service not started")
        return self._httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "TeleopService":
        handler = _make_handler(self)
        try:
            self._httpd = ThreadingHTTPServer((self.host, self._want_port), handler)
        except OSError as err:
            if err.errno == errno.EADDRINUSE:
                raise PortInUse(f"port {self._want_port} already bound") from err
            raise
        self._httpd.daemon_threads = True
        obs = self.env.reset()
        with self._state_lock:
            self._snapshot = obs
        self._running = True
        for target, name in ((self._httpd.serve_forever, "teleop-http"),
                             (self._control_loop, "teleop-control")):
            t = threading.Thread(target=target, name=name, daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self) -> None:
        self._running = False
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            try:
                c.ws.close(1001, "service stopping", wait=False)
            except OSError:
                pass
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
        for t in self._threads:
            t.join(timeout=5.0)
        self._threads.clear()
        if self.recorder.open:
            self.recorder.discard()

    # ---------------------------------------------------------- control loop

    def _control_loop(self) -> None:
        next_tick = time.monotonic()
        while self._running:
            next_tick += self.period
            try:
                self._tick()
            except Exception as err:  # keep serving; a bad tick must not kill the bridge
                print(f"teleop control tick failed: {err!r}", flush=True)
            delay = next_tick - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                next_tick = time.monotonic()  # overran: don't try to catch up

    def _tick(self) -> None:
        action = None
        while True:
            try:
                kind, payload = self._commands.get_nowait()
            except queue.Empty:
                break
            if kind == "action":
                action = payload  # coalesce: latest wins
            elif kind == "recorder":
                self._recorder_command(payload)
            elif kind == "reset":
                action = None
                obs = self.env.reset()
                with self._state_lock:
                    self._snapshot = obs
                    self._flags = {"clipped": False, "limited": False}
        if action is not None:
            result = self.env.step(action)
            if self.recorder.open:
                self.recorder.record_step(result.obs, action,
                                          executed=result.info.get("executed"))
            with self._state_lock:
                self._snapshot = result.obs
                self._flags = {"clipped": result.info["clipped"],
                               "limited": result.info["limited"]}
        self._broadcast()

    def _recorder_command(self, cmd: str) -> None:
        if cmd == "start" and not self.recorder.open:
            self.recorder.start_episode(self.episode_root)
        elif cmd == "stop" and self.recorder.open:
            self.recorder.end_episode()
        elif cmd == "discard":
            self.recorder.discard()

    def _broadcast(self) -> None:
        with self._state_lock:
            flags = dict(self._flags)
        msg = state_message(self.env.robot.get_state(),
                            clipped=flags["clipped"], limited=flags["limited"],
                            workspace=self.env.workspace,
                            recording=self.recorder.open)
        text = json.dumps(msg, separators=(",", ":"))
        with self._clients_lock:
            clients = list(self._clients)
        for c in clients:
            try:
                c.ws.send_text(text)
            except (WebSocketError, OSError):
                self._detach(c)

    # ------------------------------------------------------- session plumbing

    def _attach(self, sock: WebSocket, role: str) -> _Client | None:
        client = _Client(sock, role)
        with self._clients_lock:
            if role == "controller":
                if self._controller is not None:
                    busy = True
                else:
                    self._controller = client
                    busy = False
            else:
                busy = False
            if not busy:
                self._clients.append(client)
        if busy:
            sock.close(1008, "controller busy")
            return None
        return client

    def _detach(self, client: _Client) -> None:
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)
            if self._controller is client:
                self._controller = None
        try:
            client.ws.close(wait=False)
        except OSError:
            pass

    def _ingest(self, text: str) -> None:
        """Parse one controller message; raises ValueError on garbage."""
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as err:
            raise ValueError(f"command is not JSON: {err}") from err
        if not isinstance(obj, dict):
            raise ValueError("command must be a JSON object")
        kind = obj.pop("type", None)
        if kind == "action":
            frame = from_wire(obj)
            if frame.blocking:
                frame = ActionFrame(frame.motion, frame.ref, frame.path, False)
            self._commands.put(("action", frame))
        elif kind == "recorder":
            cmd = obj.get("cmd")
            if cmd not in ("start", "stop", "discard"):
                raise ValueError(f"unknown recorder command {cmd!r}")
            self._commands.put(("recorder", cmd))
        elif kind == "reset":
            self._commands.put(("reset", None))
        else:
            raise ValueError(f"unknown message type {kind!r}")

    # -------------------------------------------------------------- http side

    def info(self) -> dict:
        return {
            "dt": self.env.robot.config.dt,
            "period": self.period,
            "workspace": self.env.workspace.to_dict() if self.env.workspace else None,
            "limits": self.env.limits.to_dict(),
            "cameras": self.env.cameras.names() if self.env.cameras else [],
            "bindings": self.bindings.to_dict(),
            "episode_root": str(self.episode_root),
        }

    def episode_names(self) -> list:
        return [p.name for p in list_episodes(self.episode_root)]

    def camera_png(self, name: str, kind: str, near: float, far: float):
        """(png bytes, seq, timestamp) for the latest frame of one camera."""
        with self._state_lock:
            obs = self._snapshot
        if obs is None or name not in obs.images:
            raise UnknownCamera(name)
        rgb, depth = obs.images[name]
        if kind == "rgb":
            img = Image.fromarray(np.asarray(rgb, dtype=np.uint8), "RGB")
        else:
            img = Image.fromarray(normalize_depth(depth, near, far), "L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue(), obs.frame_seq.get(name), obs.frame_ts.get(name)


def _make_handler(service: TeleopService):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # tests need a quiet wire
            pass

        def _json(self, obj, code=200):
            body = json.dumps(obj, separators=(",", ":")).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            # browser consoles are served from elsewhere (file://, a static
            # host); without this they cannot read /info or /episodes
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _error(self, code, message):
            self._json({"error": message}, code=code)

        def do_GET(self):
            url = urlparse(self.path)
            parts = [p for p in url.path.split("/") if p]
            try:
                if parts == ["info"]:
                    self._json(service.info())
                elif parts == ["episodes"]:
                    self._json({"episodes": service.episode_names()})
                elif len(parts) == 3 and parts[0] == "camera" and \
                        parts[2] in ("rgb.png", "depth.png"):
                    self._camera(parts[1], parts[2][:-4], parse_qs(url.query))
                elif parts == ["ws"]:
                    self._ws(parse_qs(url.query))
                else:
                    self._error(404, f"no route for {url.path}")
            except UnknownCamera as err:
                self._error(404, f"unknown camera {err.args[0]!r}")
            except BadRange as err:
                self._error(400, str(err))
            except (WebSocketError, BrokenPipeError, ConnectionResetError):
                self.close_connection = True

        def _camera(self, name, kind, params):
            try:
                near = float(params.get("near", ["0.1"])[0])
                far = float(params.get("far", ["2.0"])[0])
            except ValueError:
                self._error(400, "near/far must be numbers")
                return
            png, seq, ts = service.camera_png(name, kind, near, far)
            self.send_response(200)
            self.send_header("Content-Type", "image/png")
            self.send_header("Content-Length", str(len(png)))
            if seq is not None:
                self.send_header("X-Frame-Seq", str(seq))
            if ts is not None:
                self.send_header("X-Frame-Timestamp", repr(float(ts)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(png)

        def _ws(self, params):
            role = params.get("role", ["observer"])[0]
            if role not in ("controller", "observer"):
                self._error(400, f"unknown role {role!r}")
                return
            sock = server_handshake(self)
            client = service._attach(sock, role)
            self.close_connection = True
            if client is None:
                return
            try:
                while True:
                    msg = sock.recv()
                    if msg is None:
                        break
                    if client.role != "controller":
                        continue  # observers receive only
                    try:
                        service._ingest(msg)
                    except (ActionError, ValueError) as err:
                        sock.close(1008, str(err)[:120], wait=False)
                        break
            except (WebSocketError, OSError):
                pass
            finally:
                service._detach(client)

    return Handler
