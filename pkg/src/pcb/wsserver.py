"""Minimal single-client WebSocket server for the live patient console.

Text frames only; enough RFC 6455 for a browser or Node client: handshake,
masked client frames, unmasked server frames, close and ping handling.
"""

from __future__ import annotations

import base64
import hashlib
import socket
import struct
from typing import Optional

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class WsClosed(Exception):
    pass


class WebSocketServer:
    def __init__(self, port: int, host: str = "127.0.0.1"):
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(1)
        self.port = self._listener.getsockname()[1]
        self._conn: Optional[socket.socket] = None
        self._buffer = b""
        self.path = ""

    def accept(self, timeout: Optional[float] = None) -> bool:
        self._listener.settimeout(timeout)
        try:
            conn, _ = self._listener.accept()
        except socket.timeout:
            return False
        conn.settimeout(10.0)
        request = b""
        while b"\r\n\r\n" not in request:
            chunk = conn.recv(4096)
            if not chunk:
                conn.close()
                return False
            request += chunk
        head = request.split(b"\r\n\r\n", 1)[0].decode("latin-1")
        lines = head.split("\r\n")
        self.path = lines[0].split(" ")[1] if len(lines[0].split(" ")) > 1 else "/"
        key = ""
        for line in lines[1:]:
            name, _, value = line.partition(":")
            if name.strip().lower() == "sec-websocket-key":
                key = value.strip()
        if not key:
            conn.close()
            return False
        accept_key = base64.b64encode(
            hashlib.sha1((key + _GUID).encode()).digest()
        ).decode()
        conn.sendall(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept_key}\r\n\r\n"
            ).encode()
        )
        self._conn = conn
        self._buffer = b""
        return True

    @property
    def connected(self) -> bool:
        return self._conn is not None

    def send_text(self, text: str) -> None:
        if self._conn is None:
            return
        payload = text.encode("utf-8")
        length = len(payload)
        if length < 126:
            header = struct.pack("!BB", 0x81, length)
        elif length < 1 << 16:
            header = struct.pack("!BBH", 0x81, 126, length)
        else:
            header = struct.pack("!BBQ", 0x81, 127, length)
        try:
            self._conn.sendall(header + payload)
        except OSError:
            self.close_client()

    def recv_text(self, timeout: float) -> Optional[str]:
        """One text frame, or None on timeout. Raises WsClosed when the peer
        goes away."""
        if self._conn is None:
            raise WsClosed()
        self._conn.settimeout(timeout)
        while True:
            frame = self._try_parse_frame()
            if frame is not None:
                opcode, payload = frame
                if opcode == 0x8:
                    self.close_client()
                    raise WsClosed()
                if opcode == 0x9:  # ping
                    self._send_control(0xA, payload)
                    continue
                if opcode in (0x1, 0x2):
                    return payload.decode("utf-8", errors="replace")
                continue
            try:
                chunk = self._conn.recv(4096)
            except socket.timeout:
                return None
            except OSError:
                self.close_client()
                raise WsClosed()
            if not chunk:
                self.close_client()
                raise WsClosed()
            self._buffer += chunk

    def _send_control(self, opcode: int, payload: bytes) -> None:
        if self._conn is not None:
            self._conn.sendall(struct.pack("!BB", 0x80 | opcode, len(payload)) + payload)

    def _try_parse_frame(self):
        buf = self._buffer
        if len(buf) < 2:
            return None
        opcode = buf[0] & 0x0F
        masked = bool(buf[1] & 0x80)
        length = buf[1] & 0x7F
        offset = 2
        if length == 126:
            if len(buf) < 4:
                return None
            length = struct.unpack("!H", buf[2:4])[0]
            offset = 4
        elif length == 127:
            if len(buf) < 10:
                return None
            length = struct.unpack("!Q", buf[2:10])[0]
            offset = 10
        mask = b""
        if masked:
            if len(buf) < offset + 4:
                return None
            mask = buf[offset:offset + 4]
            offset += 4
        if len(buf) < offset + length:
            return None
        payload = buf[offset:offset + length]
        if masked:
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        self._buffer = buf[offset + length:]
        return opcode, payload

    def close_client(self) -> None:
        if self._conn is not None:
            try:
                self._conn.close()
            except OSError:
                pass
            self._conn = None

    def close(self) -> None:
        self.close_client()
        self._listener.close()
