"""Minimal websocket endpoint (RFC 6455) for the teleop bridge.

Covers exactly what the bridge needs: the HTTP upgrade handshake, text
frames with 7/16/64-bit lengths, fragmented-message reassembly, ping/pong,
and the close handshake.  Server frames go out unmasked, client frames
masked, as the RFC requires.  Binary frames are not part of the bridge
protocol and fail the connection.

``WebSocket.send_text`` is thread-safe (one lock per connection) so a
broadcast thread and a reader thread can share the endpoint.
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
import threading

__all__ = ["WebSocketError", "WebSocket", "accept_key", "connect"]

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT, OP_TEXT, OP_BINARY = 0x0, 0x1, 0x2
OP_CLOSE, OP_PING, OP_PONG = 0x8, 0x9, 0xA


class WebSocketError(ConnectionError):
    pass


def accept_key(key: str) -> str:
    """Sec-WebSocket-Accept value for a client's Sec-WebSocket-Key."""
    digest = hashlib.sha1((key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _mask(payload: bytes, key: bytes) -> bytes:
    # XOR with the 4-byte key, repeated; int-wide XOR beats a Python loop
    reps = -(-len(payload) // 4)
    pad = (key * reps)[: len(payload)]
    return (int.from_bytes(payload, "big") ^ int.from_bytes(pad, "big")).to_bytes(
        len(payload), "big") if payload else b""


class WebSocket:
    """One endpoint of an upgraded connection."""

    def __init__(self, sock: socket.socket, *, client_side: bool):
        self._sock = sock
        self._client = client_side
        self._send_lock = threading.Lock()
        self._sent_close = False
        self._got_close = False
        self.close_code: int | None = None
        self.close_reason: str | None = None

    # --------------------------------------------------------------- wire

    def _read_exact(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            chunk = self._sock.recv(n - len(out))
            if not chunk:
                raise WebSocketError("connection dropped mid-frame")
            out.extend(chunk)
        return bytes(out)

    def _read_frame(self):
        b1, b2 = self._read_exact(2)
        fin, opcode = bool(b1 & 0x80), b1 & 0x0F
        masked, length = bool(b2 & 0x80), b2 & 0x7F
        if length == 126:
            (length,) = struct.unpack(">H", self._read_exact(2))
        elif length == 127:
            (length,) = struct.unpack(">Q", self._read_exact(8))
        if masked:
            key = self._read_exact(4)
            payload = _mask(self._read_exact(length), key)
        else:
            payload = self._read_exact(length)
        # the RFC: clients mask everything, servers nothing
        if masked == self._client:
            raise WebSocketError(f"bad masking (masked={masked}) for this side")
        return fin, opcode, payload

    def _send_frame(self, opcode: int, payload: bytes) -> None:
        head = bytearray([0x80 | opcode])
        n = len(payload)
        if n < 126:
            head.append(n)
        elif n < 1 << 16:
            head.append(126)
            head.extend(struct.pack(">H", n))
        else:
            head.append(127)
            head.extend(struct.pack(">Q", n))
        if self._client:
            key = os.urandom(4)
            head[1] |= 0x80
            head.extend(key)
            payload = _mask(payload, key)
        with self._send_lock:
            self._sock.sendall(bytes(head) + payload)

    # ---------------------------------------------------------------- api

    @property
    def closed(self) -> bool:
        return self._got_close or self._sent_close

    def send_text(self, text: str) -> None:
        if self.closed:
            raise WebSocketError("send on a closed websocket")
        self._send_frame(OP_TEXT, text.encode("utf-8"))

    def ping(self, payload: bytes = b"") -> None:
        self._send_frame(OP_PING, payload)

    def recv(self, timeout: float | None = None) -> str | None:
        """Next text message; None once the peer closed.  TimeoutError on timeout."""
        if self._got_close:
            return None
        self._sock.settimeout(timeout)
        buf = bytearray()
        assembling = False
        while True:
            fin, opcode, payload = self._read_frame()
            if opcode == OP_TEXT or (opcode == OP_CONT and assembling):
                if opcode == OP_TEXT and assembling:
                    raise WebSocketError("new text frame inside a fragmented message")
                buf.extend(payload)
                if fin:
                    return buf.decode("utf-8")
                assembling = True
            elif opcode == OP_PING:
                self._send_frame(OP_PONG, payload)
            elif opcode == OP_PONG:
                continue
            elif opcode == OP_CLOSE:
                self._on_close(payload)
                return None
            else:
                raise WebSocketError(f"unsupported frame opcode 0x{opcode:x}")

    def _on_close(self, payload: bytes) -> None:
        self._got_close = True
        if len(payload) >= 2:
            (self.close_code,) = struct.unpack(">H", payload[:2])
            self.close_reason = payload[2:].decode("utf-8", "replace")
        if not self._sent_close:
            self._sent_close = True
            try:
                self._send_frame(OP_CLOSE, payload[:2])
            except OSError:
                pass
        try:
            self._sock.close()
        except OSError:
            pass

    def close(self, code: int = 1000, reason: str = "", wait: bool = True) -> None:
        """Start (or finish) the close handshake and drop the socket."""
        if not self._sent_close:
            self._sent_close = True
            try:
                self._send_frame(OP_CLOSE, struct.pack(">H", code) + reason.encode("utf-8"))
            except OSError:
                pass
        if not self._got_close and not wait:
            try:
                self._sock.close()
            except OSError:
                pass
            return
        if not self._got_close:
            # give the peer a moment to echo the close, then drop regardless
            try:
                self._sock.settimeout(1.0)
                while True:
                    fin, opcode, payload = self._read_frame()
                    if opcode == OP_CLOSE:
                        self._got_close = True
                        if len(payload) >= 2:
                            (self.close_code,) = struct.unpack(">H", payload[:2])
                            self.close_reason = payload[2:].decode("utf-8", "replace")
                        break
            except (OSError, WebSocketError):
                pass
        try:
            self._sock.close()
        except OSError:
            pass


# ------------------------------------------------------------- handshakes


def server_handshake(handler) -> WebSocket:
    """Upgrade a BaseHTTPRequestHandler GET into a websocket.

    Writes the 101 response straight to the connection; on a malformed
    request sends 400 and raises WebSocketError.
    """
    headers = handler.headers
    key = headers.get("Sec-WebSocket-Key")
    upgrade = (headers.get("Upgrade") or "").lower()
    version = headers.get("Sec-WebSocket-Version")
    if upgrade != "websocket" or not key or version != "13":
        handler.send_response(400)
        handler.end_headers()
        raise WebSocketError("not a websocket upgrade request")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n"
        "\r\n"
    )
    handler.connection.sendall(response.encode("ascii"))
    return WebSocket(handler.connection, client_side=False)


def connect(host: str, port: int, path: str = "/ws", timeout: float = 5.0) -> WebSocket:
    """Client-side connect + upgrade; raises WebSocketError if refused."""
    sock = socket.create_connection((host, port), timeout=timeout)
    key = base64.b64encode(os.urandom(16)).decode("ascii")
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}:{port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n"
        "\r\n"
    )
    sock.sendall(request.encode("ascii"))
    # read the response head byte-wise so no frame bytes get swallowed
    head = bytearray()
    while not head.endswith(b"\r\n\r\n"):
        chunk = sock.recv(1)
        if not chunk:
            raise WebSocketError("server closed during handshake")
        head.extend(chunk)
        if len(head) > 65536:
            raise WebSocketError("oversized handshake response")
    status, _, rest = head.partition(b"\r\n")
    parts = status.split()
    if len(parts) < 2 or parts[1] != b"101":
        raise WebSocketError(f"upgrade refused: {status.decode('latin-1')}")
    fields = {}
    for line in rest.decode("latin-1").split("\r\n"):
        name, sep, value = line.partition(":")
        if sep:
            fields[name.strip().lower()] = value.strip()
    if fields.get("sec-websocket-accept") != accept_key(key):
        sock.close()
        raise WebSocketError("bad Sec-WebSocket-Accept")
    sock.settimeout(None)
    return WebSocket(sock, client_side=True)
